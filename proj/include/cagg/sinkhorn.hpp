#pragma once

// Log-domain Sinkhorn on rectangular sub-boxes of a grid. The quadratic cost
// |x - y|^2 = dx^2 + dy^2 makes the Gibbs kernel separable, so every soft-min
// is two 1-D log-sum-exp passes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/grid.hpp"

namespace cagg {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Cells [i0, i0 + nx) x [j0, j0 + ny) of a grid.
struct Box {
  int i0 = 0, j0 = 0, nx = 0, ny = 0;

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  bool contains(int i, int j) const { return i >= i0 && j >= j0 && i < i0 + nx && j < j0 + ny; }

  Box grown(int cells, const GridSpec& g, int margin = 0) const {
    Box b;
    b.i0 = std::max(margin, i0 - cells);
    b.j0 = std::max(margin, j0 - cells);
    b.nx = std::min(g.nx - margin, i0 + nx + cells) - b.i0;
    b.ny = std::min(g.ny - margin, j0 + ny + cells) - b.j0;
    return b;
  }

  static Box whole(const GridSpec& g) { return {0, 0, g.nx, g.ny}; }
};

/// Bounding box of {f > threshold}; empty box when there is none.
inline Box support_box(const ScalarField& f, double threshold = 0.0) {
  const auto& g = f.grid();
  int ilo = g.nx, ihi = -1, jlo = g.ny, jhi = -1;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (f(i, j) > threshold) {
        ilo = std::min(ilo, i), ihi = std::max(ihi, i);
        jlo = std::min(jlo, j), jhi = std::max(jhi, j);
      }
  if (ihi < 0) return {};
  return {ilo, jlo, ihi - ilo + 1, jhi - jlo + 1};
}

inline Box bounding_union(const Box& a, const Box& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  const int i0 = std::min(a.i0, b.i0), j0 = std::min(a.j0, b.j0);
  return {i0, j0, std::max(a.i0 + a.nx, b.i0 + b.nx) - i0, std::max(a.j0 + a.ny, b.j0 + b.ny) - j0};
}

inline std::vector<double> restrict_to(const ScalarField& f, const Box& b) {
  std::vector<double> out(b.size());
  for (int j = 0; j < b.ny; ++j)
    for (int i = 0; i < b.nx; ++i) out[std::size_t(j) * b.nx + i] = f(b.i0 + i, b.j0 + j);
  return out;
}

inline ScalarField extend_from(const GridSpec& g, const Box& b, const std::vector<double>& v) {
  ScalarField out(g);
  for (int j = 0; j < b.ny; ++j)
    for (int i = 0; i < b.nx; ++i) out(b.i0 + i, b.j0 + j) = v[std::size_t(j) * b.nx + i];
  return out;
}

namespace detail {

inline double lse(const double* v, const double* c, int n, const double* extra) {
  double mx = kNegInf;
  for (int k = 0; k < n; ++k) {
    const double t = v[k] - c[k] + (extra ? extra[k] : 0.0);
    if (t > mx) mx = t;
  }
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = v[k] - c[k] + (extra ? extra[k] : 0.0) - mx;
    if (t > -40.0) s += std::exp(t);
  }
  return mx + std::log(s);
}

}  // namespace detail

/// Soft-min operator between two boxes of one grid at temperature eps:
///   out(y) = log sum_x exp(w(x) - |x - y|^2 / eps) [* dx^2 or dy^2 weight].
/// Evaluated with banded products of 1-D Gaussian matrices after shifting w by
/// its max; falls back to log-sum-exp passes when w spans more than ~650 nats.
class GibbsKernel {
 public:
  enum class Weight { none, dx2, dy2 };

  GibbsKernel(const GridSpec& g, const Box& src, const Box& dst, double eps)
      : src_(src), dst_(dst), eps_(eps) {
    if (!(eps > 0.0)) throw domain_error("GibbsKernel: eps must be positive");
    if (src.size() == 0 || dst.size() == 0) throw domain_error("GibbsKernel: empty box");
    x_ = Axis(g.h, dst.nx, dst.i0, src.nx, src.i0, eps);
    y_ = Axis(g.h, dst.ny, dst.j0, src.ny, src.j0, eps);
  }

  const Box& src() const { return src_; }
  const Box& dst() const { return dst_; }
  double eps() const { return eps_; }

  /// w on src (row-major in the box) -> out on dst.
  void apply(const std::vector<double>& w, std::vector<double>& out, Weight weight = Weight::none) const {
    double hi = kNegInf, lo = std::numeric_limits<double>::infinity();
    for (double v : w)
      if (v > kNegInf) hi = std::max(hi, v), lo = std::min(lo, v);
    out.resize(dst_.size());
    if (hi == kNegInf) {
      std::fill(out.begin(), out.end(), kNegInf);
      return;
    }
    if (hi - lo < kLinearRange)
      apply_linear(w, hi, out, weight);
    else
      apply_log(w, out, weight);
  }

 private:
  static constexpr double kLinearRange = 650.0;

  struct Axis {
    int n_out = 0, n_in = 0;
    std::vector<double> c, lw, k, kw;  // cost/eps, log d^2, exp(-cost/eps), d^2 exp(-cost/eps)
    std::vector<int> lo, hi;           // nonzero band of k per output row

    Axis() = default;
    Axis(double h, int no, int off_out, int ni, int off_in, double eps) : n_out(no), n_in(ni) {
      const std::size_t n = std::size_t(no) * ni;
      c.resize(n), lw.resize(n), k.resize(n), kw.resize(n);
      lo.assign(no, ni), hi.assign(no, 0);
      for (int a = 0; a < no; ++a)
        for (int b = 0; b < ni; ++b) {
          const double d = h * ((off_out + a) - (off_in + b));
          const std::size_t id = std::size_t(a) * ni + b;
          c[id] = d * d / eps;
          lw[id] = d == 0.0 ? kNegInf : std::log(d * d);
          k[id] = std::exp(-c[id]);
          kw[id] = d * d * k[id];
          if (k[id] > 0.0) lo[a] = std::min(lo[a], b), hi[a] = std::max(hi[a], b + 1);
        }
    }
  };

  static double dot(const double* a, const double* b, int lo, int hi) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int k = lo;
    for (; k + 4 <= hi; k += 4) {
      s0 += a[k] * b[k];
      s1 += a[k + 1] * b[k + 1];
      s2 += a[k + 2] * b[k + 2];
      s3 += a[k + 3] * b[k + 3];
    }
    for (; k < hi; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
  }

  void apply_linear(const std::vector<double>& w, double shift, std::vector<double>& out, Weight weight) const {
    const int sx = src_.nx, sy = src_.ny, dx = dst_.nx, dy = dst_.ny;
    ew_.resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) ew_[k] = std::exp(w[k] - shift);
    const auto& kx = weight == Weight::dx2 ? x_.kw : x_.k;
    const auto& ky = weight == Weight::dy2 ? y_.kw : y_.k;
    tmp_.resize(std::size_t(dx) * sy);
    for (int j = 0; j < sy; ++j) {
      const double* row = ew_.data() + std::size_t(j) * sx;
      for (int i = 0; i < dx; ++i)
        tmp_[std::size_t(i) * sy + j] = dot(kx.data() + std::size_t(i) * sx, row, x_.lo[i], x_.hi[i]);
    }
    for (int i = 0; i < dx; ++i) {
      const double* col = tmp_.data() + std::size_t(i) * sy;
      for (int j = 0; j < dy; ++j) {
        const double v = dot(ky.data() + std::size_t(j) * sy, col, y_.lo[j], y_.hi[j]);
        out[std::size_t(j) * dx + i] = v > 0.0 ? shift + std::log(v) : kNegInf;
      }
    }
  }

  void apply_log(const std::vector<double>& w, std::vector<double>& out, Weight weight) const {
    const int sx = src_.nx, sy = src_.ny, dx = dst_.nx, dy = dst_.ny;
    tmp_.resize(std::size_t(dx) * sy);
    const double* ex = weight == Weight::dx2 ? x_.lw.data() : nullptr;
    const double* ey = weight == Weight::dy2 ? y_.lw.data() : nullptr;
    // tmp is stored column-major (index [i_out][j_src]) so the second pass is contiguous
    for (int j = 0; j < sy; ++j) {
      const double* row = w.data() + std::size_t(j) * sx;
      for (int i = 0; i < dx; ++i)
        tmp_[std::size_t(i) * sy + j] =
            detail::lse(row, x_.c.data() + std::size_t(i) * sx, sx, ex ? ex + std::size_t(i) * sx : nullptr);
    }
    for (int i = 0; i < dx; ++i) {
      const double* col = tmp_.data() + std::size_t(i) * sy;
      for (int j = 0; j < dy; ++j)
        out[std::size_t(j) * dx + i] =
            detail::lse(col, y_.c.data() + std::size_t(j) * sy, sy, ey ? ey + std::size_t(j) * sy : nullptr);
    }
  }

  Box src_, dst_;
  double eps_;
  Axis x_, y_;
  mutable std::vector<double> tmp_, ew_;
};

struct SinkhornOptions {
  double eps_cells = 2.0;      // eps = eps_cells * h^2
  double tol = 1e-9;           // L1 marginal violation relative to mass
  int max_iterations = 10000;
  double scaling = 0.5;        // eps-scaling factor between stages
  double stage_tol = 1e-3;
  double relaxation = 1.8;     // over-relaxation of the dual updates in the last stage, in (0, 2)
};

struct SinkhornResult {
  double value = 0.0;          // <f, a> + <g, b>, KL(gamma | a x b) formulation
  double cost = 0.0;           // <C, gamma>
  double violation = 0.0;
  int iterations = 0;
};

namespace detail {

inline std::vector<double> log_weights(const std::vector<double>& a) {
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] > 0.0 ? std::log(a[k]) : kNegInf;
  return out;
}

inline double box_diameter2(const GridSpec& g, const Box& a, const Box& b) {
  const Box u = bounding_union(a, b);
  const double lx = u.nx * g.h, ly = u.ny * g.h;
  return lx * lx + ly * ly;
}

/// Balanced entropic OT between probability vectors a (on box A) and b (on box B)
/// with reference measure a x b; f, g are the dual potentials (warm-started).
inline SinkhornResult balanced(const GridSpec& grid, const Box& A, const std::vector<double>& a, const Box& B,
                               const std::vector<double>& b, double eps, const SinkhornOptions& opt,
                               std::vector<double>& f, std::vector<double>& g, bool symmetric) {
  const auto la = log_weights(a), lb = log_weights(b);
  if (f.size() != a.size()) f.assign(a.size(), 0.0);
  if (g.size() != b.size()) g.assign(b.size(), 0.0);
  SinkhornResult res;
  std::vector<double> w, out;

  double e = std::max(eps, box_diameter2(grid, A, B));
  for (;;) {
    const bool last = e <= eps;
    const GibbsKernel k_ba(grid, B, A, e);
    const GibbsKernel k_ab(grid, A, B, e);
    const double omega = last ? opt.relaxation : 1.0;
    auto update_g = [&]() {
      if (symmetric) {
        g = f;
        return;
      }
      w.resize(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) w[k] = la[k] + f[k] / e;
      k_ab.apply(w, out);
      for (std::size_t k = 0; k < b.size(); ++k) g[k] += omega * (-e * out[k] - g[k]);
    };
    const double tol = last ? opt.tol : opt.stage_tol;
    for (int it = 0;; ++it) {
      // soft-min of g gives both the row marginal of the current plan and the next f
      w.resize(b.size());
      for (std::size_t k = 0; k < b.size(); ++k) w[k] = lb[k] + g[k] / e;
      k_ba.apply(w, out);
      double v = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] > 0.0) v += a[k] * std::fabs(std::exp(f[k] / e + out[k]) - 1.0);
      res.violation = v;
      if (it > 0 && v < tol) break;
      if (res.iterations >= opt.max_iterations)
        throw solver_error("sinkhorn: no convergence after " + std::to_string(res.iterations) +
                           " iterations, marginal violation " + std::to_string(v));
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double nf = -e * out[k];
        f[k] = symmetric ? 0.5 * (f[k] + nf) : f[k] + omega * (nf - f[k]);
      }
      update_g();
      ++res.iterations;
    }
    if (last) break;
    e = std::max(eps, e * opt.scaling);
  }

  res.value = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] > 0.0) res.value += a[k] * f[k];
  for (std::size_t k = 0; k < b.size(); ++k)
    if (b[k] > 0.0) res.value += b[k] * g[k];

  // <C, gamma> through weighted passes
  const GibbsKernel k_ba(grid, B, A, eps);
  w.resize(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) w[k] = lb[k] + g[k] / eps;
  double cost = 0.0;
  for (auto wt : {GibbsKernel::Weight::dx2, GibbsKernel::Weight::dy2}) {
    k_ba.apply(w, out, wt);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k] > 0.0 && out[k] > kNegInf) cost += a[k] * std::exp(f[k] / eps + out[k]);
  }
  res.cost = cost;
  return res;
}

}  // namespace detail

struct W2Estimate {
  double w2 = 0.0;        // sqrt of the debiased divergence, probability normalization
  double divergence = 0.0;
  double primal_cost = 0.0;  // <C, gamma> of the (biased) cross plan
  double eps = 0.0;
  int iterations = 0;
};

/// Debiased Sinkhorn divergence S = OT(a,b) - OT(a,a)/2 - OT(b,b)/2 between the
/// normalized fields; reports sqrt(max(S, 0)).
inline W2Estimate w2_divergence(const ScalarField& f, const ScalarField& g, const SinkhornOptions& opt = {}) {
  require_same_grid(f.grid(), g.grid(), "w2_estimate");
  if (!f.nonnegative() || !g.nonnegative()) throw domain_error("w2_estimate: densities must be nonnegative");
  const double mf = mass(f), mg = mass(g);
  if (!(mf > 0.0) || !(mg > 0.0)) throw domain_error("w2_estimate: zero mass");
  const auto& grid = f.grid();
  const Box A = support_box(f), B = support_box(g);
  auto normalized = [](std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    for (double& x : v) x /= s;
    return v;
  };
  const auto a = normalized(restrict_to(f, A));
  const auto b = normalized(restrict_to(g, B));
  const double eps = opt.eps_cells * grid.h * grid.h;

  W2Estimate out;
  out.eps = eps;
  std::vector<double> fa, gb, faa, gaa, fbb, gbb;
  const auto ab = detail::balanced(grid, A, a, B, b, eps, opt, fa, gb, false);
  const auto aa = detail::balanced(grid, A, a, A, a, eps, opt, faa, gaa, true);
  const auto bb = detail::balanced(grid, B, b, B, b, eps, opt, fbb, gbb, true);
  out.divergence = ab.value - 0.5 * aa.value - 0.5 * bb.value;
  out.w2 = std::sqrt(std::max(out.divergence, 0.0));
  out.primal_cost = ab.cost;
  out.iterations = ab.iterations + aa.iterations + bb.iterations;
  return out;
}

/// W2 between the probability normalizations of f and g; `eps_cells` in units of h^2.
inline double w2_estimate(const ScalarField& f, const ScalarField& g, double eps_cells = 2.0) {
  SinkhornOptions opt;
  opt.eps_cells = eps_cells;
  return w2_divergence(f, g, opt).w2;
}

/// W2 between f and g as measures of their common mass M: sqrt(M) times the normalized value.
inline double w2_estimate_mass(const ScalarField& f, const ScalarField& g, double eps_cells = 2.0) {
  const double mf = mass(f), mg = mass(g);
  if (std::fabs(mf - mg) > 1e-8 * std::max(1.0, mf))
    throw domain_error("w2_estimate_mass: masses differ by " + std::to_string(mf - mg));
  return std::sqrt(mf) * w2_estimate(f, g, eps_cells);
}

}  // namespace cagg
