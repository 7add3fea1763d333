#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace tripart {

/// The three stages of the demand model, in stacking order.
enum class Equation : int { access = 0, use = 1, quantity = 2 };

/// Incidental-truncation group: G1 has no access, G2 has access but does not
/// use, G3 uses and reports a quantity.
enum class Group : std::uint8_t { g1 = 1, g2 = 2, g3 = 3 };

/// Number of leading equations a group contributes to the likelihood.
constexpr int block_size(Group g) { return static_cast<int>(g); }

/// f(G, M): the leading block_size(g) rows and columns of a stacked 3x3 matrix.
Eigen::MatrixXd leading_block(Group g, const Eigen::Matrix3d& m);

/// Stacked location parameters (access, use, quantity coefficient vectors).
struct LocationParams {
  Eigen::VectorXd access;
  Eigen::VectorXd use;
  Eigen::VectorXd quantity;

  static LocationParams zeros(Eigen::Index h, Eigen::Index k, Eigen::Index l);
  static LocationParams unstack(const Eigen::VectorXd& stacked, Eigen::Index h, Eigen::Index k,
                                Eigen::Index l);

  Eigen::Index dim() const { return access.size() + use.size() + quantity.size(); }
  Eigen::VectorXd stacked() const;
  const Eigen::VectorXd& operator[](Equation e) const;
  bool all_finite() const;
};

/// Unidentified covariance of the augmented system and its identified image.
struct CovarianceState {
  Eigen::Matrix3d omega = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d sigma = Eigen::Matrix3d::Identity();
};

/// Result of mapping an unidentified covariance onto the identified scale.
struct Identified {
  Eigen::Matrix3d sigma;
  /// Per-equation multipliers that move location parameters onto the
  /// identified scale: (1/sqrt(omega_11), 1/sqrt(omega_22), 1).
  Eigen::Vector3d rescale;
};

/// sigma = D omega D with D = diag(1/sqrt(omega_11), 1/sqrt(omega_22), 1).
/// Throws DecompositionError when omega is not SPD.
Identified identify(const Eigen::Matrix3d& omega);

/// Location parameters on the identified scale.
LocationParams rescale_location(const LocationParams& theta, const Eigen::Vector3d& rescale);

bool is_spd(const Eigen::MatrixXd& m);

/// Conjugate priors: N(theta0, Theta0) on stacked theta, IW(R0, r0) on omega.
struct PriorSpec {
  Eigen::VectorXd theta0;
  Eigen::MatrixXd theta_cov;
  Eigen::Matrix3d scale = Eigen::Matrix3d::Identity();
  double dof = 5.0;

  /// theta0 = 0, Theta0 = 1000 I, R0 = I3, r0 = 3 + 2.
  static PriorSpec noninformative(Eigen::Index dim);

  /// Throws InvalidArgument on dimension mismatch, non-SPD matrices or r0 <= 2.
  void validate(Eigen::Index dim) const;
};

}  // namespace tripart
