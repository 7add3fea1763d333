#include "tripart/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tripart/distributions.hpp"
#include "tripart/errors.hpp"

namespace tripart {

namespace {

constexpr std::uint64_t kLatentTag = 0x4c4154454e54ULL;  // "LATENT"
constexpr std::uint64_t kParamTag = 0x504152414dULL;     // "PARAM"
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr Group kGroups[3] = {Group::g1, Group::g2, Group::g3};

int gidx(Group g) { return static_cast<int>(g) - 1; }

// Floor the spectrum of a nearly-SPD matrix.
Eigen::Matrix3d repair_spd(const Eigen::Matrix3d& m) {
  const Eigen::Matrix3d sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sym);
  Eigen::Vector3d ev = eig.eigenvalues();
  const double floor = std::max(1e-10 * std::abs(ev.maxCoeff()), 1e-12);
  for (int i = 0; i < 3; ++i) ev(i) = std::max(ev(i), floor);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

// Conditional law of one coordinate of a Gaussian vector given the others:
// mean shift coefficients and residual variance.
struct Conditional {
  Eigen::RowVectorXd coef;
  double variance = 0.0;
};

Conditional conditional_of(const Eigen::MatrixXd& cov, int l) {
  const auto n = cov.rows();
  std::vector<int> rest;
  for (int k = 0; k < n; ++k) {
    if (k != l) rest.push_back(k);
  }
  const auto m = static_cast<Eigen::Index>(rest.size());
  Eigen::MatrixXd s(m, m);
  Eigen::RowVectorXd cross(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    cross(i) = cov(l, rest[i]);
    for (Eigen::Index j = 0; j < m; ++j) s(i, j) = cov(rest[i], rest[j]);
  }
  Conditional out;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    out.variance = -1.0;
    return out;
  }
  out.coef = llt.solve(cross.transpose()).transpose();
  out.variance = cov(l, l) - out.coef.dot(cross);
  return out;
}

struct LatentConditionals {
  Conditional g2[2];
  Conditional g3[2];
  double g1_variance = 1.0;

  bool valid() const {
    return g1_variance > 0.0 && g2[0].variance > 0.0 && g2[1].variance > 0.0 &&
           g3[0].variance > 0.0 && g3[1].variance > 0.0 && std::isfinite(g3[0].variance) &&
           std::isfinite(g3[1].variance);
  }
};

LatentConditionals latent_conditionals(const Eigen::Matrix3d& omega) {
  LatentConditionals c;
  c.g1_variance = omega(0, 0);
  const Eigen::MatrixXd two = omega.topLeftCorner(2, 2);
  c.g2[0] = conditional_of(two, 0);
  c.g2[1] = conditional_of(two, 1);
  c.g3[0] = conditional_of(omega, 0);
  c.g3[1] = conditional_of(omega, 1);
  return c;
}

std::string dump_state(const LocationParams& theta, const Eigen::Matrix3d& omega) {
  std::ostringstream out;
  Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, ", ", "; ", "", "", "[", "]");
  out << "theta=" << theta.stacked().transpose().format(fmt) << " omega=" << omega.format(fmt);
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------

void SamplerConfig::validate() const {
  if (iterations <= 0) throw InvalidArgument("iterations must be positive");
  if (burn_in < 0) throw InvalidArgument("burn-in must be non-negative");
  if (thin <= 0) throw InvalidArgument("thin must be positive");
  if (retained() == 0) {
    throw InvalidArgument("no retained draws: iterations must exceed burn-in by at least thin");
  }
}

SamplerContext::SamplerContext(const Dataset& data) : data_(&data) {
  order_.resize(static_cast<std::size_t>(data.size()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  const auto& ids = data.ids();
  std::stable_sort(order_.begin(), order_.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ids[a] < ids[b]; });
  const auto& groups = data.partition().group;
  for (auto i : order_) members_[gidx(groups[i])].push_back(i);

  for (Group g : kGroups) {
    const int gi = gidx(g);
    const auto& rows = members_[gi];
    for (int s = 0; s < block_size(g); ++s) {
      const auto& x = data.design(static_cast<Equation>(s));
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), x.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        sub.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
      }
      group_design_[gi][s] = std::move(sub);
    }
    for (int s = 0; s < block_size(g); ++s) {
      for (int t = 0; t < block_size(g); ++t) {
        cross_[gi][s][t] = group_design_[gi][s].transpose() * group_design_[gi][t];
      }
    }
  }
}

const std::vector<Eigen::Index>& SamplerContext::members(Group g) const {
  return members_[gidx(g)];
}

Eigen::Index SamplerContext::offset(Equation e) const {
  switch (e) {
    case Equation::access:
      return 0;
    case Equation::use:
      return dim(Equation::access);
    case Equation::quantity:
      break;
  }
  return dim(Equation::access) + dim(Equation::use);
}

const Eigen::MatrixXd& SamplerContext::cross(Group g, int s, int t) const {
  return cross_[gidx(g)][s][t];
}

const Eigen::MatrixXd& SamplerContext::group_design(Group g, int s) const {
  return group_design_[gidx(g)][s];
}

// ---------------------------------------------------------------------------

LatentState initial_latents(const SamplerContext& ctx, const RandomStream& stream) {
  const auto& data = ctx.data();
  LatentState s;
  s.access = Eigen::VectorXd::Zero(data.size());
  s.use = Eigen::VectorXd::Constant(data.size(), kNaN);
  for (auto i : ctx.order()) {
    RandomStream rng = stream.substream(static_cast<std::uint64_t>(data.ids()[i]));
    const Group g = data.partition().group[i];
    const auto a_iv = g == Group::g1 ? dist::TruncationInterval::non_positive()
                                     : dist::TruncationInterval::positive();
    s.access(i) = dist::sample_truncated_normal(0.0, 1.0, a_iv, rng);
    if (g != Group::g1) {
      const auto c_iv = g == Group::g2 ? dist::TruncationInterval::non_positive()
                                       : dist::TruncationInterval::positive();
      s.use(i) = dist::sample_truncated_normal(0.0, 1.0, c_iv, rng);
    }
  }
  return s;
}

LatentState draw_latents(const SamplerContext& ctx, const LatentState& current,
                         const LocationParams& theta, const Eigen::Matrix3d& omega_in,
                         const RandomStream& stream, RepairCounters* counters) {
  const auto& data = ctx.data();
  Eigen::Matrix3d omega = omega_in;
  LatentConditionals cond = latent_conditionals(omega);
  if (!cond.valid()) {
    omega = repair_spd(omega);
    cond = latent_conditionals(omega);
    if (counters) ++counters->spd_repairs;
    if (!cond.valid()) {
      throw NumericalFailure("latent draw: conditional variance not positive after SPD repair");
    }
  }

  const Eigen::VectorXd mu_a = data.design(Equation::access) * theta.access;
  const Eigen::VectorXd mu_c = data.design(Equation::use) * theta.use;
  const Eigen::VectorXd mu_y = data.design(Equation::quantity) * theta.quantity;

  LatentState next = current;
  const auto pos = dist::TruncationInterval::positive();
  const auto nonpos = dist::TruncationInterval::non_positive();

  for (auto i : ctx.order()) {
    const auto id = data.ids()[i];
    RandomStream rng = stream.substream(static_cast<std::uint64_t>(id));
    try {
      switch (data.partition().group[i]) {
        case Group::g1:
          next.access(i) = dist::sample_truncated_normal(mu_a(i), cond.g1_variance, nonpos, rng);
          break;
        case Group::g2: {
          const auto& ca = cond.g2[0];
          const auto& cc = cond.g2[1];
          next.access(i) = dist::sample_truncated_normal(
              mu_a(i) + ca.coef(0) * (next.use(i) - mu_c(i)), ca.variance, pos, rng);
          next.use(i) = dist::sample_truncated_normal(
              mu_c(i) + cc.coef(0) * (next.access(i) - mu_a(i)), cc.variance, nonpos, rng);
          break;
        }
        case Group::g3: {
          const auto& ca = cond.g3[0];
          const auto& cc = cond.g3[1];
          const double ey = *data.log_quantity(i) - mu_y(i);
          next.access(i) = dist::sample_truncated_normal(
              mu_a(i) + ca.coef(0) * (next.use(i) - mu_c(i)) + ca.coef(1) * ey, ca.variance, pos,
              rng);
          next.use(i) = dist::sample_truncated_normal(
              mu_c(i) + cc.coef(0) * (next.access(i) - mu_a(i)) + cc.coef(1) * ey, cc.variance,
              pos, rng);
          break;
        }
      }
    } catch (const DegenerateTailError& ex) {
      throw DegenerateTailError(std::string(ex.what()) + " [observation id " + std::to_string(id) +
                                    "]",
                                id);
    }
  }
  return next;
}

// ---------------------------------------------------------------------------

ThetaPosterior theta_posterior(const SamplerContext& ctx, const LatentState& latents,
                               const Eigen::Matrix3d& omega, const PriorSpec& prior) {
  const auto& data = ctx.data();
  const Eigen::Index dim = ctx.total_dim();
  ThetaPosterior post;
  Eigen::LLT<Eigen::MatrixXd> prior_llt(prior.theta_cov);
  if (prior_llt.info() != Eigen::Success) throw NumericalFailure("prior covariance is not SPD");
  post.precision = prior_llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  post.linear = post.precision * prior.theta0;

  const Eigen::Index offsets[3] = {ctx.offset(Equation::access), ctx.offset(Equation::use),
                                   ctx.offset(Equation::quantity)};
  for (Group g : kGroups) {
    const auto& rows = ctx.members(g);
    if (rows.empty()) continue;
    const int b = block_size(g);
    Eigen::LLT<Eigen::MatrixXd> llt(leading_block(g, omega));
    if (llt.info() != Eigen::Success) {
      throw DecompositionError("omega block for the group is not positive definite");
    }
    const Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(b, b));

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd t(n, b);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto i = rows[static_cast<std::size_t>(r)];
      t(r, 0) = latents.access(i);
      if (b > 1) t(r, 1) = latents.use(i);
      if (b > 2) t(r, 2) = *data.log_quantity(i);
    }
    const Eigen::MatrixXd z = t * w;  // w symmetric: row r holds (W T_r)^T
    for (int s = 0; s < b; ++s) {
      const auto& xs = ctx.group_design(g, s);
      post.linear.segment(offsets[s], xs.cols()) += xs.transpose() * z.col(s);
      for (int u = 0; u < b; ++u) {
        const auto& c = ctx.cross(g, s, u);
        post.precision.block(offsets[s], offsets[u], c.rows(), c.cols()) += w(s, u) * c;
      }
    }
  }
  return post;
}

LocationParams draw_theta(const SamplerContext& ctx, const LatentState& latents,
                          const Eigen::Matrix3d& omega, const PriorSpec& prior,
                          RandomStream& rng) {
  const ThetaPosterior post = theta_posterior(ctx, latents, omega, prior);
  const Eigen::VectorXd draw = dist::sample_normal_from_precision(post.precision, post.linear, rng);
  return LocationParams::unstack(draw, ctx.dim(Equation::access), ctx.dim(Equation::use),
                                 ctx.dim(Equation::quantity));
}

// ---------------------------------------------------------------------------

Eigen::Matrix3d draw_omega(const SamplerContext& ctx, const LatentState& latents,
                           const LocationParams& theta, const PriorSpec& prior, RandomStream& rng,
                           Step2Set step2) {
  const auto& data = ctx.data();
  const Eigen::Matrix3d& r0 = prior.scale;
  const double dof0 = prior.dof;

  // Step 1: access variance from every observation.
  double r11 = r0(0, 0);
  for (auto i : ctx.order()) {
    const double e = latents.access(i) - data.design(Equation::access).row(i).dot(theta.access);
    r11 += e * e;
  }
  const double n_all = static_cast<double>(data.size());
  const double omega_a2 = dist::sample_inverse_gamma_dof(r11, dof0 - 2.0 + n_all, rng);

  // Step 2: (access, use) block from individuals with access.
  Eigen::Matrix2d r22 = r0.topLeftCorner(2, 2);
  double n_step2 = 0.0;
  for (auto i : ctx.order()) {
    const Group g = data.partition().group[i];
    if (g == Group::g1 || (step2 == Step2Set::g2_only && g == Group::g3)) continue;
    Eigen::Vector2d e;
    e(0) = latents.access(i) - data.design(Equation::access).row(i).dot(theta.access);
    e(1) = latents.use(i) - data.design(Equation::use).row(i).dot(theta.use);
    r22 += e * e.transpose();
    n_step2 += 1.0;
  }
  double schur_c = r22(1, 1) - r22(0, 1) * r22(0, 1) / r22(0, 0);
  if (!(schur_c > 0.0)) {
    Eigen::LLT<Eigen::Matrix2d> llt(r22);
    const double l11 = llt.info() == Eigen::Success ? llt.matrixL()(1, 1) : 0.0;
    schur_c = l11 * l11;
    if (!(schur_c > 0.0)) throw NumericalFailure("omega draw: use-block Schur complement <= 0");
  }
  // Inverse-Wishart marginal dof for the use-given-access variance is r0 - 1.
  const double omega_c1 = dist::sample_inverse_gamma_dof(schur_c, dof0 - 1.0 + n_step2, rng);
  const double omega_ca1 =
      r22(1, 0) / r22(0, 0) + std::sqrt(omega_c1 / r22(0, 0)) * dist::standard_normal(rng);
  const double omega_ca = omega_ca1 * omega_a2;
  const double omega_c2 = omega_c1 + omega_ca * omega_ca / omega_a2;

  Eigen::Matrix2d omega22;
  omega22 << omega_a2, omega_ca, omega_ca, omega_c2;

  // Step 3: quantity row from users.
  Eigen::Matrix3d rn = r0;
  for (auto i : ctx.members(Group::g3)) {
    Eigen::Vector3d e;
    e(0) = latents.access(i) - data.design(Equation::access).row(i).dot(theta.access);
    e(1) = latents.use(i) - data.design(Equation::use).row(i).dot(theta.use);
    e(2) = *data.log_quantity(i) - data.design(Equation::quantity).row(i).dot(theta.quantity);
    rn += e * e.transpose();
  }
  const Eigen::Matrix2d rn22 = rn.topLeftCorner(2, 2);
  const Eigen::Vector2d rn23 = rn.block(0, 2, 2, 1);
  Eigen::LLT<Eigen::Matrix2d> rn22_llt(rn22);
  if (rn22_llt.info() != Eigen::Success) {
    throw NumericalFailure("omega draw: accumulated (access, use) scale is not SPD");
  }
  const Eigen::Vector2d reg = rn22_llt.solve(rn23);  // (R22^-1 R23), i.e. (R32 R22^-1)^T
  double schur_y = rn(2, 2) - rn23.dot(reg);
  if (!(schur_y > 0.0)) {
    Eigen::LLT<Eigen::Matrix3d> llt(rn);
    const double l22 = llt.info() == Eigen::Success ? llt.matrixL()(2, 2) : 0.0;
    schur_y = l22 * l22;
    if (!(schur_y > 0.0)) throw NumericalFailure("omega draw: quantity Schur complement <= 0");
  }
  const double n_g3 = static_cast<double>(ctx.members(Group::g3).size());
  const double omega_y1 = dist::sample_inverse_gamma_dof(schur_y, dof0 + n_g3, rng);
  const Eigen::Matrix2d rn22_inv = rn22_llt.solve(Eigen::Matrix2d::Identity());
  const Eigen::MatrixXd omega32_1 =
      dist::sample_matrix_normal(reg.transpose(), rn22_inv, omega_y1, rng);

  const Eigen::RowVector2d omega32 = omega32_1 * omega22;
  const double omega_y2 = omega_y1 + omega32.dot(omega32_1.row(0));  // Omega32 Omega22^-1 Omega23

  Eigen::Matrix3d omega;
  omega.topLeftCorner(2, 2) = omega22;
  omega(2, 0) = omega(0, 2) = omega32(0);
  omega(2, 1) = omega(1, 2) = omega32(1);
  omega(2, 2) = omega_y2;
  return omega;
}

// ---------------------------------------------------------------------------

ChainStore run_chain(const Dataset& data, const PriorSpec& prior, const SamplerConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const SamplerContext ctx(data);
  prior.validate(ctx.total_dim());

  const RandomStream root(config.seed);
  const RandomStream latent_root = root.substream(kLatentTag);
  const RandomStream param_root = root.substream(kParamTag);

  LocationParams theta = LocationParams::zeros(ctx.dim(Equation::access), ctx.dim(Equation::use),
                                               ctx.dim(Equation::quantity));
  Eigen::Matrix3d omega = Eigen::Matrix3d::Identity();
  LatentState latents = initial_latents(ctx, latent_root.substream(0));
  RepairCounters counters;

  ChainStore store(data.names());
  auto& meta = store.metadata();
  meta.seed = config.seed;
  meta.iterations = config.iterations;
  meta.burn_in = config.burn_in;
  meta.thin = config.thin;
  meta.step2 = config.step2 == Step2Set::accessed ? "accessed" : "g2_only";
  for (Group g : kGroups) meta.group_sizes[gidx(g)] = ctx.members(g).size();
  meta.prior = prior;

  for (int it = 1; it <= config.iterations; ++it) {
    try {
      latents = draw_latents(ctx, latents, theta, omega,
                             latent_root.substream(static_cast<std::uint64_t>(it)), &counters);
      RandomStream rng = param_root.substream(static_cast<std::uint64_t>(it));
      theta = draw_theta(ctx, latents, omega, prior, rng);
      omega = draw_omega(ctx, latents, theta, prior, rng, config.step2);
      if (!theta.all_finite() || !omega.allFinite()) {
        throw NumericalFailure("non-finite parameter draw");
      }
      const Identified identified = identify(omega);
      if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
        store.append(theta, omega, identified);
      }
    } catch (const NumericalError& ex) {
      throw NumericalFailure("iteration " + std::to_string(it) + ": " + ex.what() + "; state " +
                             dump_state(theta, omega));
    }
  }
  meta.spd_repairs = counters.spd_repairs;
  meta.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return store;
}

}  // namespace tripart
