#pragma once

// Periodic, uniform, cell-centered grids in two or three dimensions and the
// finite-difference operators defined on them.
//
// Cell (i,j,k) has its center at ((i+1/2)h, (j+1/2)h, (k+1/2)h). Storage is
// flat and row-major with x fastest: idx = i + n*(j + n*k). A face field
// stores, for each axis a, the value at face (idx + 1/2 e_a) in slot idx, so
// the "plus" face of a cell shares its index and the "minus" face lives at
// the minus neighbour's index.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace chlog {

class GridSpec {
public:
  GridSpec() = default;

  GridSpec(int dim, int n, double length) : dim_(dim), n_(n), length_(length) {
    if (dim != 2 && dim != 3) {
      throw std::invalid_argument("GridSpec: dim must be 2 or 3, got " + std::to_string(dim));
    }
    if (n < 2 || n % 2 != 0) {
      throw std::invalid_argument("GridSpec: n must be even and >= 2, got " + std::to_string(n));
    }
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw std::invalid_argument("GridSpec: length must be positive and finite");
    }
    spacing_ = length / n;
    if (spacing_ * n != length) {
      throw std::invalid_argument("GridSpec: spacing * n does not reproduce length exactly");
    }
  }

  int dim() const { return dim_; }
  int n() const { return n_; }
  double length() const { return length_; }
  double spacing() const { return spacing_; }

  std::size_t cells() const {
    std::size_t c = 1;
    for (int a = 0; a < dim_; ++a) c *= static_cast<std::size_t>(n_);
    return c;
  }

  /// h^dim, the volume of one cell.
  double cell_volume() const { return std::pow(spacing_, dim_); }
  double domain_volume() const { return std::pow(length_, dim_); }

  std::size_t stride(int axis) const {
    std::size_t s = 1;
    for (int a = 0; a < axis; ++a) s *= static_cast<std::size_t>(n_);
    return s;
  }

  std::size_t index(int i, int j, int k = 0) const {
    const auto w = [this](int v) { return static_cast<std::size_t>(((v % n_) + n_) % n_); };
    const std::size_t nn = static_cast<std::size_t>(n_);
    return w(i) + nn * (w(j) + (dim_ == 3 ? nn * w(k) : 0));
  }

  /// The grid with half as many cells per axis on the same domain.
  GridSpec coarsened() const { return GridSpec(dim_, n_ / 2, length_); }
  GridSpec refined() const { return GridSpec(dim_, n_ * 2, length_); }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.dim_ == b.dim_ && a.n_ == b.n_ && a.length_ == b.length_;
  }

private:
  int dim_ = 2;
  int n_ = 0;
  double length_ = 1.0;
  double spacing_ = 0.0;
};

class GridMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
  if (!(a == b)) throw GridMismatch(std::string(where) + ": grid mismatch");
}

class CellField {
public:
  CellField() = default;
  explicit CellField(const GridSpec& grid, double value = 0.0)
      : grid_(grid), data_(grid.cells(), value) {}
  CellField(const GridSpec& grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
    if (data_.size() != grid_.cells()) {
      throw std::invalid_argument("CellField: data length does not match grid");
    }
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t idx) { return data_[idx]; }
  double operator[](std::size_t idx) const { return data_[idx]; }

  double& at(int i, int j, int k = 0) { return data_[grid_.index(i, j, k)]; }
  double at(int i, int j, int k = 0) const { return data_[grid_.index(i, j, k)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  CellField& operator+=(const CellField& o) {
    require_same_grid(grid_, o.grid_, "CellField +=");
    for (std::size_t c = 0; c < data_.size(); ++c) data_[c] += o.data_[c];
    return *this;
  }
  CellField& operator-=(const CellField& o) {
    require_same_grid(grid_, o.grid_, "CellField -=");
    for (std::size_t c = 0; c < data_.size(); ++c) data_[c] -= o.data_[c];
    return *this;
  }
  CellField& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  CellField& fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
    return *this;
  }

  friend CellField operator+(CellField a, const CellField& b) { return a += b; }
  friend CellField operator-(CellField a, const CellField& b) { return a -= b; }
  friend CellField operator*(double s, CellField a) { return a *= s; }

  /// Adds s*x in place.
  CellField& axpy(double s, const CellField& x) {
    require_same_grid(grid_, x.grid_, "CellField axpy");
    for (std::size_t c = 0; c < data_.size(); ++c) data_[c] += s * x.data_[c];
    return *this;
  }

  friend bool operator==(const CellField& a, const CellField& b) {
    return a.grid_ == b.grid_ && a.data_ == b.data_;
  }

private:
  GridSpec grid_;
  std::vector<double> data_;
};

class FaceField {
public:
  FaceField() = default;
  explicit FaceField(const GridSpec& grid, double value = 0.0) : grid_(grid) {
    for (int a = 0; a < grid.dim(); ++a) axes_[a].assign(grid.cells(), value);
  }

  const GridSpec& grid() const { return grid_; }

  std::vector<double>& axis(int a) { return axes_[a]; }
  const std::vector<double>& axis(int a) const { return axes_[a]; }

  FaceField& operator*=(const FaceField& o) {
    require_same_grid(grid_, o.grid_, "FaceField *=");
    for (int a = 0; a < grid_.dim(); ++a)
      for (std::size_t c = 0; c < axes_[a].size(); ++c) axes_[a][c] *= o.axes_[a][c];
    return *this;
  }
  friend FaceField operator*(FaceField a, const FaceField& b) { return a *= b; }

private:
  GridSpec grid_;
  std::array<std::vector<double>, 3> axes_;
};

// ---------------------------------------------------------------------------
// Cell iteration with periodic neighbour indices.

struct Neighbors {
  std::array<std::size_t, 3> minus{};
  std::array<std::size_t, 3> plus{};
};

namespace detail {

/// Visits cells in storage order. With color >= 0 only cells with
/// (i+j+k) % 2 == color are visited (red-black ordering).
template <class F>
void for_each_cell(const GridSpec& g, F&& f, int color = -1) {
  const std::size_t n = static_cast<std::size_t>(g.n());
  const std::size_t nz = g.dim() == 3 ? n : 1;
  const std::size_t plane = n * n;
  Neighbors nb;
  for (std::size_t k = 0; k < nz; ++k) {
    const std::size_t koff = k * plane;
    const std::size_t km = (k == 0 ? nz - 1 : k - 1) * plane;
    const std::size_t kp = (k + 1 == nz ? 0 : k + 1) * plane;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t row = koff + j * n;
      const std::size_t jm = (j == 0 ? n - 1 : j - 1) * n;
      const std::size_t jp = (j + 1 == n ? 0 : j + 1) * n;
      std::size_t i0 = 0;
      std::size_t step = 1;
      if (color >= 0) {
        i0 = (j + k + static_cast<std::size_t>(color)) & 1u;
        step = 2;
      }
      for (std::size_t i = i0; i < n; i += step) {
        const std::size_t idx = row + i;
        nb.minus[0] = row + (i == 0 ? n - 1 : i - 1);
        nb.plus[0] = row + (i + 1 == n ? 0 : i + 1);
        nb.minus[1] = koff + jm + i;
        nb.plus[1] = koff + jp + i;
        if (nz > 1) {
          nb.minus[2] = km + j * n + i;
          nb.plus[2] = kp + j * n + i;
        }
        f(idx, nb);
      }
    }
  }
}

/// Calls f(std::integral_constant<int, D>{}) for the grid dimension D.
template <class F>
decltype(auto) dispatch_dim(int dim, F&& f) {
  if (dim == 2) return f(std::integral_constant<int, 2>{});
  return f(std::integral_constant<int, 3>{});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Difference and average operators.

/// A_a u at every face: half the sum of the two adjacent cells.
inline FaceField face_average(const CellField& u) {
  const GridSpec& g = u.grid();
  FaceField out(g);
  detail::for_each_cell(g, [&](std::size_t idx, const Neighbors& nb) {
    for (int a = 0; a < g.dim(); ++a) out.axis(a)[idx] = 0.5 * (u[nb.plus[a]] + u[idx]);
  });
  return out;
}

/// D_a u at every face.
inline FaceField gradient(const CellField& u) {
  const GridSpec& g = u.grid();
  const double inv_h = 1.0 / g.spacing();
  FaceField out(g);
  detail::for_each_cell(g, [&](std::size_t idx, const Neighbors& nb) {
    for (int a = 0; a < g.dim(); ++a) out.axis(a)[idx] = (u[nb.plus[a]] - u[idx]) * inv_h;
  });
  return out;
}

inline CellField divergence(const FaceField& f) {
  const GridSpec& g = f.grid();
  const double inv_h = 1.0 / g.spacing();
  CellField out(g);
  detail::for_each_cell(g, [&](std::size_t idx, const Neighbors& nb) {
    double acc = 0.0;
    for (int a = 0; a < g.dim(); ++a) acc += (f.axis(a)[idx] - f.axis(a)[nb.minus[a]]) * inv_h;
    out[idx] = acc;
  });
  return out;
}

namespace detail {

// Both forms evaluate d_a(D_a u) with the same floating-point expression as
// divergence(gradient(u)), so the results agree bitwise.
inline double laplacian_at(std::span<const double> u, std::size_t idx, const Neighbors& nb, int dim,
                           double inv_h) {
  double acc = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double gp = (u[nb.plus[a]] - u[idx]) * inv_h;
    const double gm = (u[idx] - u[nb.minus[a]]) * inv_h;
    acc += (gp - gm) * inv_h;
  }
  return acc;
}

inline double div_mobility_grad_at(const FaceField& m, std::span<const double> u, std::size_t idx,
                                   const Neighbors& nb, int dim, double inv_h) {
  double acc = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double gp = m.axis(a)[idx] * ((u[nb.plus[a]] - u[idx]) * inv_h);
    const double gm = m.axis(a)[nb.minus[a]] * ((u[idx] - u[nb.minus[a]]) * inv_h);
    acc += (gp - gm) * inv_h;
  }
  return acc;
}

inline void require_positive_mobility(const FaceField& m) {
  for (int a = 0; a < m.grid().dim(); ++a)
    for (double v : m.axis(a))
      if (!(v > 0.0)) throw std::invalid_argument("mobility must be strictly positive at every face");
}

}  // namespace detail

inline CellField laplacian(const CellField& u) {
  const GridSpec& g = u.grid();
  const double inv_h = 1.0 / g.spacing();
  CellField out(g);
  const auto uv = u.values();
  detail::for_each_cell(g, [&](std::size_t idx, const Neighbors& nb) {
    out[idx] = detail::laplacian_at(uv, idx, nb, g.dim(), inv_h);
  });
  return out;
}

/// div(m grad u) with face mobility m. Throws if any mobility value is not
/// strictly positive.
inline CellField div_mobility_grad(const FaceField& m, const CellField& u) {
  require_same_grid(m.grid(), u.grid(), "div_mobility_grad");
  detail::require_positive_mobility(m);
  const GridSpec& g = u.grid();
  const double inv_h = 1.0 / g.spacing();
  CellField out(g);
  const auto uv = u.values();
  detail::for_each_cell(g, [&](std::size_t idx, const Neighbors& nb) {
    out[idx] = detail::div_mobility_grad_at(m, uv, idx, nb, g.dim(), inv_h);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Inner products and norms. All cell sums run in storage order.

inline double inner_product(const CellField& u, const CellField& v) {
  require_same_grid(u.grid(), v.grid(), "inner_product");
  double acc = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c) acc += u[c] * v[c];
  return u.grid().cell_volume() * acc;
}

/// [f, g] = sum over axes of < a_a(f g), 1 >.
inline double face_inner_product(const FaceField& f, const FaceField& g) {
  require_same_grid(f.grid(), g.grid(), "face_inner_product");
  const GridSpec& grid = f.grid();
  double total = 0.0;
  for (int a = 0; a < grid.dim(); ++a) {
    const auto& fa = f.axis(a);
    const auto& ga = g.axis(a);
    double acc = 0.0;
    detail::for_each_cell(grid, [&](std::size_t idx, const Neighbors& nb) {
      acc += 0.5 * (fa[idx] * ga[idx] + fa[nb.minus[a]] * ga[nb.minus[a]]);
    });
    total += acc;
  }
  return grid.cell_volume() * total;
}

inline double norm_l2(const CellField& u) { return std::sqrt(inner_product(u, u)); }

inline double norm_lp(const CellField& u, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("norm_lp: p must be >= 1");
  double acc = 0.0;
  for (double v : u.values()) acc += std::pow(std::abs(v), p);
  return std::pow(u.grid().cell_volume() * acc, 1.0 / p);
}

inline double norm_linf(const CellField& u) {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double norm_grad_l2(const CellField& u) {
  const FaceField g = gradient(u);
  return std::sqrt(face_inner_product(g, g));
}

inline double sum(const CellField& u) {
  double acc = 0.0;
  for (double v : u.values()) acc += v;
  return acc;
}

inline double mean(const CellField& u) { return sum(u) / static_cast<double>(u.size()); }

inline double min_value(const CellField& u) {
  return *std::min_element(u.values().begin(), u.values().end());
}
inline double max_value(const CellField& u) {
  return *std::max_element(u.values().begin(), u.values().end());
}

inline bool all_finite(const CellField& u) {
  return std::all_of(u.values().begin(), u.values().end(), [](double v) { return std::isfinite(v); });
}

/// Samples f(x, y, z) at cell centres.
template <class F>
CellField sample(const GridSpec& g, F&& f) {
  CellField out(g);
  const double h = g.spacing();
  const int nz = g.dim() == 3 ? g.n() : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.n(); ++j)
      for (int i = 0; i < g.n(); ++i)
        out.at(i, j, k) = f((i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h);
  return out;
}

/// Periodic shift by s cells along an axis: out(x) = u(x - s e_axis).
inline CellField shifted(const CellField& u, int axis, int s) {
  const GridSpec& g = u.grid();
  CellField out(g);
  const int nz = g.dim() == 3 ? g.n() : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.n(); ++j)
      for (int i = 0; i < g.n(); ++i) {
        std::array<int, 3> c{i, j, k};
        c[axis] += s;
        out.at(c[0], c[1], c[2]) = u.at(i, j, k);
      }
  return out;
}

}  // namespace chlog
