#include "lswarm/kalman.hpp"

#include <algorithm>
#include <cmath>

namespace lswarm {

namespace {
Eigen::Vector3d ev(const Vec3& v) { return {v.x, v.y, v.z}; }
}  // namespace

void kalman_step(KalmanTracker& tr, const std::optional<std::pair<Vec3, Vec3>>& meas, double dt) {
  if (meas) {
    tr.step(dt, std::make_pair(ev(meas->first), ev(meas->second)));
  } else {
    tr.step(dt, std::nullopt);
  }
}

Vec3 tracked_position(const KalmanTracker& tr) {
  const auto& x = tr.mean();
  return {x(0), x(1), x(2)};
}

Vec3 tracked_velocity(const KalmanTracker& tr) {
  const auto& x = tr.mean();
  return {x(3), x(4), x(5)};
}

double inflated_radius(double r, const Cov6& covariance) {
  const Eigen::Matrix3d block = covariance.topLeftCorner<3, 3>();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (block + block.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double lmax = std::max(0.0, es.eigenvalues().maxCoeff());
  return r + std::sqrt(lmax);
}

}  // namespace lswarm
