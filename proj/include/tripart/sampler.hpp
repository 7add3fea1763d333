#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tripart/chain_store.hpp"
#include "tripart/dataset.hpp"
#include "tripart/model.hpp"
#include "tripart/random.hpp"

namespace tripart {

/// Which accessed individuals feed the (access, use) covariance block.
enum class Step2Set {
  /// Every individual with access (G2 and G3).
  accessed,
  /// Non-users with access only (G2), for sensitivity runs.
  g2_only,
};

struct SamplerConfig {
  int iterations = 6000;
  int burn_in = 1000;
  int thin = 5;
  std::uint64_t seed = 1;
  Step2Set step2 = Step2Set::accessed;

  /// Throws InvalidArgument for non-positive settings or no retained draws.
  void validate() const;
  int retained() const { return iterations > burn_in ? (iterations - burn_in) / thin : 0; }
};

/// Augmented latent utilities. `use` is NaN for G1 observations.
struct LatentState {
  Eigen::VectorXd access;
  Eigen::VectorXd use;
};

/// Per-run precomputation over a dataset: canonical observation order (by
/// record id) and the constant group-wise cross products of the designs.
class SamplerContext {
 public:
  explicit SamplerContext(const Dataset& data);

  const Dataset& data() const { return *data_; }
  /// Dataset row indices of a group, sorted by record id.
  const std::vector<Eigen::Index>& members(Group g) const;
  /// All dataset rows sorted by record id.
  const std::vector<Eigen::Index>& order() const { return order_; }
  Eigen::Index dim(Equation e) const { return data_->design(e).cols(); }
  Eigen::Index offset(Equation e) const;
  Eigen::Index total_dim() const { return dim(Equation::access) + dim(Equation::use) + dim(Equation::quantity); }

  /// Sum over members of group g of x_s x_t^T.
  const Eigen::MatrixXd& cross(Group g, int s, int t) const;
  /// Rows of design(s) restricted to group g, in canonical order.
  const Eigen::MatrixXd& group_design(Group g, int s) const;

 private:
  const Dataset* data_;
  std::vector<Eigen::Index> order_;
  std::vector<Eigen::Index> members_[3];
  Eigen::MatrixXd cross_[3][3][3];
  Eigen::MatrixXd group_design_[3][3];
};

/// Counters for numerical repairs made along the chain.
struct RepairCounters {
  std::size_t spd_repairs = 0;
};

/// Latents drawn at theta = 0, omega = I from their truncated priors.
LatentState initial_latents(const SamplerContext& ctx, const RandomStream& stream);

/// One sweep over the latent utilities. Observation i draws from
/// stream.substream(id_i), so results do not depend on observation order.
LatentState draw_latents(const SamplerContext& ctx, const LatentState& current,
                         const LocationParams& theta, const Eigen::Matrix3d& omega,
                         const RandomStream& stream, RepairCounters* counters = nullptr);

/// Posterior mean and precision of the location block (for white-box tests).
struct ThetaPosterior {
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear;
};
ThetaPosterior theta_posterior(const SamplerContext& ctx, const LatentState& latents,
                               const Eigen::Matrix3d& omega, const PriorSpec& prior);

LocationParams draw_theta(const SamplerContext& ctx, const LatentState& latents,
                          const Eigen::Matrix3d& omega, const PriorSpec& prior,
                          RandomStream& rng);

/// Sequential (access, use | access, quantity | access and use) draw of the
/// unidentified covariance.
Eigen::Matrix3d draw_omega(const SamplerContext& ctx, const LatentState& latents,
                           const LocationParams& theta, const PriorSpec& prior, RandomStream& rng,
                           Step2Set step2 = Step2Set::accessed);

ChainStore run_chain(const Dataset& data, const PriorSpec& prior, const SamplerConfig& config);

}  // namespace tripart
