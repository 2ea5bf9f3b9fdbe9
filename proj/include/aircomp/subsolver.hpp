#pragma once

// Convexified subproblem: maximize c subject to affine rows
//   c * gap_j - g_j^T z + k_j <= 0
// and one unit ball per group, where z is the real embedding of the complex
// codebooks (re/im interleaved per entry, groups stacked).
//
// Rows are scaled by 1/gap_j inside the solver.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "aircomp/geometry.hpp"

namespace aircomp {

struct ConvexSubproblem {
  std::vector<int> group_dims;  // real dimension of each group, 2*N_l
  std::vector<std::size_t> row_start{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> coefs;    // g_j restricted to its support
  std::vector<double> offsets;  // k_j
  std::vector<double> gaps;     // gap_j

  std::size_t rows() const { return offsets.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(std::accumulate(group_dims.begin(), group_dims.end(), 0)); }
  std::size_t group_offset(std::size_t g) const {
    return static_cast<std::size_t>(std::accumulate(group_dims.begin(), group_dims.begin() + static_cast<long>(g), 0));
  }

  void add_row(std::span<const std::uint32_t> idx, std::span<const double> val, double offset, double gap) {
    cols.insert(cols.end(), idx.begin(), idx.end());
    coefs.insert(coefs.end(), val.begin(), val.end());
    row_start.push_back(cols.size());
    offsets.push_back(offset);
    gaps.push_back(gap);
  }

  double linear_part(std::size_t j, std::span<const double> z) const {
    double s = 0.0;
    for (std::size_t p = row_start[j]; p < row_start[j + 1]; ++p) s += coefs[p] * z[cols[p]];
    return s;
  }

  /// c*gap - g^T z + k; feasible when <= 0.
  double slack(std::size_t j, std::span<const double> z, double c) const {
    return c * gaps[j] - linear_part(j, z) + offsets[j];
  }
};

/// Real embedding of a design's codebooks.
inline std::vector<double> embed(const ModulationDesign& design) {
  std::vector<double> z;
  for (const auto& cb : design.codebooks)
    for (const cplx& v : cb) {
      z.push_back(v.real());
      z.push_back(v.imag());
    }
  return z;
}

inline ModulationDesign unembed(const ModulationDesign& shape, std::span<const double> z) {
  ModulationDesign d = shape;
  std::size_t p = 0;
  for (auto& cb : d.codebooks)
    for (cplx& v : cb) {
      v = {z[p], z[p + 1]};
      p += 2;
    }
  if (p != z.size()) throw std::invalid_argument("embedding length does not match the design shape");
  return d;
}

inline std::vector<int> group_dims(const ModulationDesign& design) {
  std::vector<int> dims;
  for (const auto& cb : design.codebooks) dims.push_back(static_cast<int>(2 * cb.size()));
  return dims;
}

/// Linearizes every constraint in `subset` (all when empty) at `point`.
/// `weights` holds one weight per slot (empty: all ones).
inline ConvexSubproblem linearize(const ModulationDesign& point, const ConstraintSet& cs, std::span<const double> weights,
                                  std::span<const std::uint32_t> subset = {}) {
  ConvexSubproblem sub;
  sub.group_dims = group_dims(point);
  std::vector<std::size_t> offset(sub.group_dims.size());
  for (std::size_t g = 0; g < offset.size(); ++g) offset[g] = sub.group_offset(g);
  const PointCache points(point);

  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  auto emit = [&](std::size_t j) {
    const PairConstraint& pc = cs.items[j];
    const double w = weights.empty() ? 1.0 : weights[pc.slot];
    const cplx d = points.difference(pc);
    const std::size_t base = offset[point.shared() ? 0 : pc.slot];
    const int Q = point.slot_symbols(static_cast<int>(pc.slot));
    idx.clear();
    val.clear();
    // d/dz of 2 Re(conj(d) * e^T x) = 2 s (d_re, d_im) at entry (node, q)
    for (auto [k, q, s] : cs.support(j)) {
      const auto entry = base + 2 * static_cast<std::size_t>(k * Q + q);
      idx.push_back(static_cast<std::uint32_t>(entry));
      val.push_back(2.0 * w * s * d.real());
      idx.push_back(static_cast<std::uint32_t>(entry + 1));
      val.push_back(2.0 * w * s * d.imag());
    }
    sub.add_row(idx, val, w * std::norm(d), pc.gap);
  };
  if (subset.empty())
    for (std::size_t j = 0; j < cs.size(); ++j) emit(j);
  else
    for (std::uint32_t j : subset) emit(j);
  return sub;
}

enum class SolveStatus { optimal, max_iter, infeasible };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "?";
}

struct SolverOptions {
  double tol_feas = 1e-8;
  double tol_opt = 1e-8;
  int max_iter = 200;
};

struct SubproblemSolution {
  std::vector<double> z;
  double c = 0.0;
  SolveStatus status = SolveStatus::infeasible;
  double feas_residual = 0.0;  // max(0, max constraint value)
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  std::vector<double> multipliers;  // one per row
};

namespace detail {

// Second-order cone helpers; a cone vector is (u0, u1) with u0 >= |u1|.
using Vec = Eigen::VectorXd;
using Seg = Eigen::Ref<const Eigen::VectorXd>;

inline double jdot(const Seg& u, const Seg& v) { return u[0] * v[0] - u.tail(u.size() - 1).dot(v.tail(v.size() - 1)); }

/// sqrt(u^T J u) without cancellation.
inline double jnorm(const Seg& u) {
  const double r = u.tail(u.size() - 1).norm();
  return std::sqrt(std::max(0.0, (u[0] - r) * (u[0] + r)));
}

/// Jordan product u o v.
inline Vec circ(const Seg& u, const Seg& v) {
  Vec r(u.size());
  r[0] = u.dot(v);
  r.tail(u.size() - 1) = u[0] * v.tail(v.size() - 1) + v[0] * u.tail(u.size() - 1);
  return r;
}

/// x with lambda o x = d; `det` is lambda^T J lambda.
inline Vec circ_solve(const Seg& l, const Seg& d, double det) {
  const auto k = l.size() - 1;
  Vec x(l.size());
  x[0] = (l[0] * d[0] - l.tail(k).dot(d.tail(k))) / det;
  x.tail(k) = (d.tail(k) - x[0] * l.tail(k)) / l[0];
  return x;
}

/// Largest step a with u + a d in the cone (infinity if unbounded).
inline double cone_step(const Seg& u, const Seg& d) {
  const auto k = u.size() - 1;
  const double dr = d.tail(k).norm(), ur = u.tail(k).norm();
  const double A = (d[0] - dr) * (d[0] + dr);
  const double B = u[0] * d[0] - u.tail(k).dot(d.tail(k));
  const double C = (u[0] - ur) * (u[0] + ur);
  double amax = std::numeric_limits<double>::infinity();
  if (d[0] < 0.0) amax = -u[0] / d[0];
  // roots of A a^2 + 2 B a + C = 0 with C > 0
  if (std::abs(A) < 1e-300) {
    if (B < 0.0) amax = std::min(amax, -C / (2.0 * B));
  } else {
    const double disc = B * B - A * C;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double r : {(-B - sq) / A, (-B + sq) / A})
        if (r > 0.0) amax = std::min(amax, r);
    }
  }
  return amax;
}

/// Nesterov-Todd scaling W = beta (2 v v^T - J) of one cone, with the
/// scaled point lambda = W z and its determinant.
struct SocScaling {
  double beta = 1.0;
  Vec v;
  Vec lambda;
  double lambda_det = 1.0;
  Vec apply(const Seg& x) const {  // W x
    Vec r = 2.0 * v.dot(x) * v;
    r[0] -= x[0];
    r.tail(x.size() - 1) += x.tail(x.size() - 1);
    return beta * r;
  }
  Vec apply_inv(const Seg& x) const {  // W^{-1} x = (2 J v v^T J - J) x / beta
    Vec Jv = v;
    Jv.tail(v.size() - 1) *= -1.0;
    Vec r = 2.0 * Jv.dot(x) * Jv;
    r[0] -= x[0];
    r.tail(x.size() - 1) += x.tail(x.size() - 1);
    return r / beta;
  }
};

inline SocScaling nt_scaling(const Seg& s, const Seg& z) {
  const double aa = jnorm(s);
  const double bb = jnorm(z);
  SocScaling w;
  w.beta = std::sqrt(aa / bb);
  const double cc = std::sqrt((s.dot(z) / (aa * bb) + 1.0) / 2.0);
  Vec zb = z / bb;
  zb.tail(z.size() - 1) *= -1.0;
  w.v = (s / aa + zb) / (2.0 * cc);
  w.v[0] += 1.0;
  w.v /= std::sqrt(2.0 * w.v[0]);
  // lambda / sqrt(aa bb) = (cc, ((cc + z0) s1 + (cc + s0) z1) / (2 cc + s0 + z0)) in normalized terms
  const auto k = s.size() - 1;
  const double s0 = s[0] / aa, z0 = z[0] / bb;
  const double dd = 2.0 * cc + s0 + z0;
  w.lambda.resize(s.size());
  w.lambda[0] = cc;
  w.lambda.tail(k) = ((cc + z0) / dd) * (s.tail(k) / aa) + ((cc + s0) / dd) * (z.tail(k) / bb);
  w.lambda *= std::sqrt(aa * bb);
  w.lambda_det = aa * bb;
  return w;
}

}  // namespace detail

/// Primal-dual interior-point solve (Nesterov-Todd scaling, Mehrotra
/// predictor-corrector) of
///   min -c  s.t.  c - a_j^T z + b_j <= 0,  ||z_g|| <= 1,
/// with a_j = g_j / gap_j and b_j = k_j / gap_j. Infeasible start.
inline SubproblemSolution solve(const ConvexSubproblem& sub, const SolverOptions& opt = {}) {
  using detail::Vec;
  const std::size_t m_rows = sub.rows();
  const std::size_t n = sub.dim();
  const std::size_t G = sub.group_dims.size();
  if (m_rows == 0) throw std::invalid_argument("subproblem without constraints is unbounded");

  std::vector<double> a(sub.coefs.size());
  Vec b(static_cast<Eigen::Index>(m_rows));
  for (std::size_t j = 0; j < m_rows; ++j) {
    for (std::size_t p = sub.row_start[j]; p < sub.row_start[j + 1]; ++p) a[p] = sub.coefs[p] / sub.gaps[j];
    b[static_cast<Eigen::Index>(j)] = sub.offsets[j] / sub.gaps[j];
  }
  std::vector<Eigen::Index> zoff(G + 1, 0);  // variable offsets of each group
  std::vector<Eigen::Index> soff(G + 1, 0);  // cone offsets inside s / z
  soff[0] = static_cast<Eigen::Index>(m_rows);
  for (std::size_t g = 0; g < G; ++g) {
    zoff[g + 1] = zoff[g] + sub.group_dims[g];
    soff[g + 1] = soff[g] + 1 + sub.group_dims[g];
  }
  const auto N = static_cast<Eigen::Index>(n + 1);
  const Eigen::Index ic = N - 1;
  const Eigen::Index S = soff[G];
  const auto M = static_cast<Eigen::Index>(m_rows);
  const double degree = static_cast<double>(m_rows + G);

  // cone constraint data: s = h - G x
  Vec h = Vec::Zero(S);
  h.head(M) = -b;
  for (std::size_t g = 0; g < G; ++g) h[soff[g]] = 1.0;
  Vec cobj = Vec::Zero(N);
  cobj[ic] = -1.0;

  auto G_mul = [&](const Vec& x) {  // G x
    Vec r = Vec::Zero(S);
    for (std::size_t j = 0; j < m_rows; ++j) {
      double s = x[ic];
      for (std::size_t p = sub.row_start[j]; p < sub.row_start[j + 1]; ++p) s -= a[p] * x[sub.cols[p]];
      r[static_cast<Eigen::Index>(j)] = s;
    }
    for (std::size_t g = 0; g < G; ++g) r.segment(soff[g] + 1, zoff[g + 1] - zoff[g]) = -x.segment(zoff[g], zoff[g + 1] - zoff[g]);
    return r;
  };
  auto Gt_mul = [&](const Vec& u) {  // G^T u
    Vec r = Vec::Zero(N);
    for (std::size_t j = 0; j < m_rows; ++j) {
      const double uj = u[static_cast<Eigen::Index>(j)];
      r[ic] += uj;
      for (std::size_t p = sub.row_start[j]; p < sub.row_start[j + 1]; ++p) r[sub.cols[p]] -= a[p] * uj;
    }
    for (std::size_t g = 0; g < G; ++g) r.segment(zoff[g], zoff[g + 1] - zoff[g]) -= u.segment(soff[g] + 1, zoff[g + 1] - zoff[g]);
    return r;
  };
  // adds G^T diag(d) G over the linear rows
  auto add_rows = [&](Eigen::MatrixXd& H, const Vec& d) {
    for (std::size_t j = 0; j < m_rows; ++j) {
      const double w = d[static_cast<Eigen::Index>(j)];
      const std::size_t p0 = sub.row_start[j], p1 = sub.row_start[j + 1];
      for (std::size_t p = p0; p < p1; ++p) {
        const auto r = static_cast<Eigen::Index>(sub.cols[p]);
        for (std::size_t q = p0; q < p1; ++q) H(r, static_cast<Eigen::Index>(sub.cols[q])) += w * a[p] * a[q];
        H(r, ic) -= w * a[p];
        H(ic, r) -= w * a[p];
      }
      H(ic, ic) += w;
    }
  };
  auto factor = [&](Eigen::MatrixXd& H) {
    const Vec scale = H.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    H = scale.asDiagonal() * H * scale.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
      H.diagonal().array() += 1e-13;
      llt.compute(H);
    }
    return std::make_pair(std::move(llt), scale);
  };
  auto max_step = [&](const Vec& u, const Vec& d) {
    double amax = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < M; ++j)
      if (d[j] < 0.0) amax = std::min(amax, -u[j] / d[j]);
    for (std::size_t g = 0; g < G; ++g) {
      const auto len = soff[g + 1] - soff[g];
      amax = std::min(amax, detail::cone_step(u.segment(soff[g], len), d.segment(soff[g], len)));
    }
    return amax;
  };
  // shift u into the cone interior if needed
  auto make_interior = [&](Vec& u) {
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < M; ++j) worst = std::max(worst, -u[j]);
    for (std::size_t g = 0; g < G; ++g) {
      const auto len = soff[g + 1] - soff[g];
      worst = std::max(worst, u.segment(soff[g] + 1, len - 1).norm() - u[soff[g]]);
    }
    if (worst >= 0.0) {
      u.head(M).array() += 1.0 + worst;
      for (std::size_t g = 0; g < G; ++g) u[soff[g]] += 1.0 + worst;
    }
  };

  // Initial point: least squares primal, least norm dual.
  Vec x, s, z;
  {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    add_rows(H, Vec::Ones(M));
    for (std::size_t g = 0; g < G; ++g)
      H.block(zoff[g], zoff[g], zoff[g + 1] - zoff[g], zoff[g + 1] - zoff[g]).diagonal().array() += 1.0;
    auto [llt, scale] = factor(H);
    x = scale.asDiagonal() * llt.solve(scale.asDiagonal() * Gt_mul(h));
    s = h - G_mul(x);
    const Vec w = scale.asDiagonal() * llt.solve(scale.asDiagonal() * (-cobj));
    z = G_mul(w);
    make_interior(s);
    make_interior(z);
  }

  SubproblemSolution sol;
  const double h_scale = std::max(1.0, h.norm());
  int it = 0;
  bool converged = false;
  std::vector<detail::SocScaling> W(G);
  Vec lambda(S);
  for (; it < opt.max_iter; ++it) {
    const Vec rx = Gt_mul(z) + cobj;
    const Vec rz = G_mul(x) + s - h;
    const double gap = s.dot(z);
    sol.dual_residual = rx.norm();
    sol.duality_gap = gap;
    const double pres = rz.norm() / h_scale;
    if (pres <= opt.tol_feas && sol.dual_residual <= opt.tol_feas && gap <= opt.tol_opt) {
      converged = true;
      break;
    }
    const double mu = gap / degree;

    // scaling and scaled point lambda = W z = W^{-1} s
    Vec w2inv_lp(M);  // z / s on linear rows
    for (Eigen::Index j = 0; j < M; ++j) {
      lambda[j] = std::sqrt(s[j] * z[j]);
      w2inv_lp[j] = z[j] / s[j];
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    add_rows(H, w2inv_lp);
    // The cone block of G^T W^{-2} G is beta^{-2} (I + rho v1 v1^T); built
    // from this closed form rather than a dense product of W^{-1}.
    for (std::size_t g = 0; g < G; ++g) {
      const auto len = soff[g + 1] - soff[g];
      W[g] = detail::nt_scaling(s.segment(soff[g], len), z.segment(soff[g], len));
      lambda.segment(soff[g], len) = W[g].lambda;
      const auto d = zoff[g + 1] - zoff[g];
      const double b2 = 1.0 / (W[g].beta * W[g].beta);
      const Vec v1 = W[g].v.tail(d);
      auto block = H.block(zoff[g], zoff[g], d, d);
      block.noalias() += (8.0 * b2 * (1.0 + v1.squaredNorm())) * v1 * v1.transpose();
      block.diagonal().array() += b2;
    }
    auto [llt, scale] = factor(H);
    auto reduced = [&](const Vec& r) { return Vec(scale.asDiagonal() * llt.solve(scale.asDiagonal() * r)); };

    auto scale_apply = [&](const Vec& u, bool inverse) {  // W u or W^{-1} u over all cones
      Vec r(S);
      for (Eigen::Index j = 0; j < M; ++j) {
        const double wj = std::sqrt(s[j] / z[j]);
        r[j] = inverse ? u[j] / wj : u[j] * wj;
      }
      for (std::size_t g = 0; g < G; ++g) {
        const auto len = soff[g + 1] - soff[g];
        r.segment(soff[g], len) = inverse ? W[g].apply_inv(u.segment(soff[g], len)) : W[g].apply(u.segment(soff[g], len));
      }
      return r;
    };
    auto w2inv_apply = [&](const Vec& u) {
      Vec r(S);
      r.head(M) = w2inv_lp.cwiseProduct(u.head(M));
      for (std::size_t g = 0; g < G; ++g) {
        const auto len = soff[g + 1] - soff[g];
        r.segment(soff[g], len) = W[g].apply_inv(W[g].apply_inv(u.segment(soff[g], len)));
      }
      return r;
    };
    auto lambda_solve = [&](const Vec& d) {  // lambda \ d
      Vec r(S);
      for (Eigen::Index j = 0; j < M; ++j) r[j] = d[j] / lambda[j];
      for (std::size_t g = 0; g < G; ++g) {
        const auto len = soff[g + 1] - soff[g];
        r.segment(soff[g], len) = detail::circ_solve(lambda.segment(soff[g], len), d.segment(soff[g], len), W[g].lambda_det);
      }
      return r;
    };
    auto lambda_circ = [&](const Vec& u, const Vec& v) {
      Vec r(S);
      for (Eigen::Index j = 0; j < M; ++j) r[j] = u[j] * v[j];
      for (std::size_t g = 0; g < G; ++g) {
        const auto len = soff[g + 1] - soff[g];
        r.segment(soff[g], len) = detail::circ(u.segment(soff[g], len), v.segment(soff[g], len));
      }
      return r;
    };
    // Newton system with complementarity right-hand side ds:
    //   G^T dz = -rx, G dx + ds_ = -rz, lambda o (W dz + W^{-1} ds_) = ds
    auto newton = [&](const Vec& ds, Vec& dx, Vec& dzv, Vec& dsv) {
      const Vec qd = lambda_solve(ds);
      const Vec u = rz + scale_apply(qd, false);
      // ds_ from the primal equation, dz from W dz + W^{-1} ds_ = lambda \ ds;
      // forming dz as W^{-2} (G dx + u) would amplify O(1) cancellation
      auto complete = [&](const Vec& dx_in, Vec& dz_out, Vec& ds_out) {
        ds_out = -rz - G_mul(dx_in);
        dz_out = scale_apply(qd - scale_apply(ds_out, true), true);
      };
      dx = reduced(-rx - Gt_mul(w2inv_apply(u)));
      complete(dx, dzv, dsv);
      // one refinement step against G^T dz = -rx, kept only if it helps
      const Vec res = -rx - Gt_mul(dzv);
      Vec dx_ref = dx + reduced(res), dz_ref, ds_ref;
      complete(dx_ref, dz_ref, ds_ref);
      if ((rx + Gt_mul(dz_ref)).norm() < res.norm()) {
        dx = std::move(dx_ref);
        dzv = std::move(dz_ref);
        dsv = std::move(ds_ref);
      }
    };

    const Vec lsq = lambda_circ(lambda, lambda);
    Vec dx_a, dz_a, ds_a;
    newton(-lsq, dx_a, dz_a, ds_a);
    const double a_aff = std::min(1.0, std::min(max_step(s, ds_a), max_step(z, dz_a)));
    const double gap_aff = (s + a_aff * ds_a).dot(z + a_aff * dz_a);
    const double sigma = std::pow(std::clamp(gap_aff / gap, 0.0, 1.0), 3);

    Vec e = Vec::Zero(S);
    e.head(M).setOnes();
    for (std::size_t g = 0; g < G; ++g) e[soff[g]] = 1.0;
    const Vec corr = lambda_circ(scale_apply(ds_a, true), scale_apply(dz_a, false));
    Vec dx, dzv, dsv;
    newton(-lsq - corr + sigma * mu * e, dx, dzv, dsv);
    const double step = std::min(1.0, 0.99 * std::min(max_step(s, dsv), max_step(z, dzv)));
    const Vec x_next = x + step * dx;
    const Vec s_next = s + step * dsv;
    const Vec z_next = z + step * dzv;
    if (!x_next.allFinite() || !s_next.allFinite() || !z_next.allFinite() || step < 1e-12) break;
    x = x_next;
    s = s_next;
    z = z_next;
  }

  sol.iterations = it;
  sol.status = converged ? SolveStatus::optimal : SolveStatus::max_iter;
  // pull each group back onto the unit ball if the iterate overshoots by rounding
  for (std::size_t g = 0; g < G; ++g) {
    auto seg = x.segment(zoff[g], zoff[g + 1] - zoff[g]);
    const double nrm = seg.norm();
    if (nrm > 1.0) seg /= nrm;
  }
  sol.z.assign(x.data(), x.data() + n);
  sol.c = x[ic];
  double worst = 0.0;
  for (std::size_t j = 0; j < m_rows; ++j) worst = std::max(worst, sol.c - sub.linear_part(j, sol.z) / sub.gaps[j] + b[static_cast<Eigen::Index>(j)]);
  sol.feas_residual = worst;
  sol.multipliers.assign(z.data(), z.data() + m_rows);
  return sol;
}

struct SurrogateOptions {
  SolverOptions solver;
  /// Rows seeded into the working set: scaled distance within this factor of c.
  double seed_ratio = 1.5;
  std::size_t seed_cap = 4000;
  std::size_t add_per_round = 2000;
  int max_rounds = 60;
  /// Violations (normalized by gap) below this are treated as satisfied.
  double violation_tol = 1e-10;
};

struct SurrogateResult {
  ModulationDesign design;
  double c = 0.0;
  SolveStatus status = SolveStatus::infeasible;
  int rounds = 0;
  int ipm_iterations = 0;
  std::size_t working_rows = 0;
  double max_violation = 0.0;  // over the whole constraint set, normalized
  std::vector<std::uint32_t> active;  // rows with non-negligible multipliers
};

/// Solves the linearization at `point` over the full constraint set by
/// cutting planes: solve on a working set, add the most violated surrogate
/// rows, repeat. `c_now` only sizes the initial working set.
inline SurrogateResult solve_surrogate(const ModulationDesign& point, double c_now, const ConstraintSet& cs,
                                       std::span<const double> weights, std::span<const std::uint32_t> warm = {},
                                       const SurrogateOptions& opt = {}) {
  const std::size_t M = cs.size();
  if (M == 0) throw std::invalid_argument("surrogate over an empty constraint set");
  const PointCache now(point);
  auto weight = [&](const PairConstraint& pc) { return weights.empty() ? 1.0 : weights[pc.slot]; };

  std::vector<cplx> lin_dir(M);
  std::vector<double> ratio(M);
  for (std::size_t j = 0; j < M; ++j) {
    const PairConstraint& pc = cs.items[j];
    lin_dir[j] = now.difference(pc);
    ratio[j] = weight(pc) * std::norm(lin_dir[j]) / pc.gap;
  }

  std::vector<char> in_set(M, 0);
  std::vector<std::uint32_t> working;
  for (std::uint32_t j : warm)
    if (j < M && !in_set[j]) {
      in_set[j] = 1;
      working.push_back(j);
    }
  {
    std::vector<std::uint32_t> order(M);
    std::iota(order.begin(), order.end(), 0u);
    const double limit = opt.seed_ratio * c_now;
    auto mid = std::partition(order.begin(), order.end(), [&](std::uint32_t j) { return ratio[j] <= limit; });
    std::size_t take = static_cast<std::size_t>(mid - order.begin());
    take = std::clamp<std::size_t>(take, std::min<std::size_t>(M, 64), std::min(M, opt.seed_cap));
    auto by_ratio = [&](std::uint32_t x, std::uint32_t y) { return ratio[x] < ratio[y] || (ratio[x] == ratio[y] && x < y); };
    std::nth_element(order.begin(), order.begin() + static_cast<long>(take - 1), order.end(), by_ratio);
    std::sort(order.begin(), order.begin() + static_cast<long>(take), by_ratio);
    for (std::size_t i = 0; i < take; ++i)
      if (!in_set[order[i]]) {
        in_set[order[i]] = 1;
        working.push_back(order[i]);
      }
  }

  SurrogateResult res;
  std::vector<double> violation(M);
  SubproblemSolution sol;
  for (int round = 0; round < opt.max_rounds; ++round) {
    const ConvexSubproblem sub = linearize(point, cs, weights, working);
    sol = solve(sub, opt.solver);
    res.rounds = round + 1;
    res.ipm_iterations += sol.iterations;
    if (sol.status == SolveStatus::infeasible) break;

    const ModulationDesign cand = unembed(point, sol.z);
    const PointCache next(cand);
    std::vector<std::uint32_t> violated;
    res.max_violation = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      const PairConstraint& pc = cs.items[j];
      const cplx e = next.difference(pc);
      const cplx d = lin_dir[j];
      const double lin = weight(pc) * (2.0 * (d.real() * e.real() + d.imag() * e.imag()) - std::norm(d));
      violation[j] = sol.c - lin / pc.gap;
      if (violation[j] > opt.violation_tol) {
        res.max_violation = std::max(res.max_violation, violation[j]);
        if (!in_set[j]) violated.push_back(static_cast<std::uint32_t>(j));
      }
    }
    if (violated.empty()) break;
    if (violated.size() > opt.add_per_round) {
      auto worse = [&](std::uint32_t x, std::uint32_t y) {
        return violation[x] > violation[y] || (violation[x] == violation[y] && x < y);
      };
      std::nth_element(violated.begin(), violated.begin() + static_cast<long>(opt.add_per_round), violated.end(), worse);
      violated.resize(opt.add_per_round);
      std::sort(violated.begin(), violated.end());
    }
    for (std::uint32_t j : violated) {
      in_set[j] = 1;
      working.push_back(j);
    }
  }

  res.design = unembed(point, sol.z);
  res.c = sol.c;
  res.status = sol.status;
  res.working_rows = working.size();
  double lmax = 0.0;
  for (double l : sol.multipliers) lmax = std::max(lmax, l);
  for (std::size_t i = 0; i < sol.multipliers.size(); ++i)
    if (sol.multipliers[i] > 1e-6 * lmax) res.active.push_back(working[i]);
  return res;
}

}  // namespace aircomp
