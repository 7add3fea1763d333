#include "tripart/model.hpp"

#include <cmath>

#include "tripart/errors.hpp"

namespace tripart {

Eigen::MatrixXd leading_block(Group g, const Eigen::Matrix3d& m) {
  const int n = block_size(g);
  return m.topLeftCorner(n, n);
}

LocationParams LocationParams::zeros(Eigen::Index h, Eigen::Index k, Eigen::Index l) {
  return {Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(l)};
}

LocationParams LocationParams::unstack(const Eigen::VectorXd& stacked, Eigen::Index h,
                                       Eigen::Index k, Eigen::Index l) {
  if (stacked.size() != h + k + l) throw InvalidArgument("stacked parameter length mismatch");
  return {stacked.segment(0, h), stacked.segment(h, k), stacked.segment(h + k, l)};
}

Eigen::VectorXd LocationParams::stacked() const {
  Eigen::VectorXd out(dim());
  out << access, use, quantity;
  return out;
}

const Eigen::VectorXd& LocationParams::operator[](Equation e) const {
  switch (e) {
    case Equation::access:
      return access;
    case Equation::use:
      return use;
    case Equation::quantity:
      break;
  }
  return quantity;
}

bool LocationParams::all_finite() const {
  return access.allFinite() && use.allFinite() && quantity.allFinite();
}

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

Identified identify(const Eigen::Matrix3d& omega) {
  if (!is_spd(omega)) throw DecompositionError("identify: omega is not symmetric positive definite");
  Identified out;
  out.rescale << 1.0 / std::sqrt(omega(0, 0)), 1.0 / std::sqrt(omega(1, 1)), 1.0;
  out.sigma = out.rescale.asDiagonal() * omega * out.rescale.asDiagonal();
  out.sigma(0, 0) = 1.0;
  out.sigma(1, 1) = 1.0;
  out.sigma(1, 0) = out.sigma(0, 1);
  out.sigma(2, 0) = out.sigma(0, 2);
  out.sigma(2, 1) = out.sigma(1, 2);
  return out;
}

LocationParams rescale_location(const LocationParams& theta, const Eigen::Vector3d& rescale) {
  return {theta.access * rescale(0), theta.use * rescale(1), theta.quantity * rescale(2)};
}

PriorSpec PriorSpec::noninformative(Eigen::Index dim) {
  PriorSpec p;
  p.theta0 = Eigen::VectorXd::Zero(dim);
  p.theta_cov = 1000.0 * Eigen::MatrixXd::Identity(dim, dim);
  p.scale = Eigen::Matrix3d::Identity();
  p.dof = 3.0 + 2.0;
  return p;
}

void PriorSpec::validate(Eigen::Index dim) const {
  if (theta0.size() != dim || theta_cov.rows() != dim || theta_cov.cols() != dim) {
    throw InvalidArgument("prior: location prior dimension does not match the design (" +
                          std::to_string(dim) + ")");
  }
  if (!theta0.allFinite()) throw InvalidArgument("prior: theta0 must be finite");
  if (dim > 0 && !is_spd(theta_cov)) throw InvalidArgument("prior: Theta0 must be SPD");
  if (!is_spd(scale)) throw InvalidArgument("prior: R0 must be SPD");
  if (!(dof > 2.0)) throw InvalidArgument("prior: r0 must exceed 2");
}

}  // namespace tripart
