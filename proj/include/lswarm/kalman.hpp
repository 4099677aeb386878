#pragma once

#include <optional>

#include <Eigen/Dense>

#include "lswarm/geom3.hpp"

namespace lswarm {

/// Noise levels of the constant-velocity model.
struct KalmanParams {
  double accel_std = 0.5;     ///< white acceleration noise, m/s^2
  double pos_std = 0.1;       ///< position measurement noise, m
  double vel_std = 0.1;       ///< velocity measurement noise, m/s
  bool measure_velocity = true;
  double init_pos_std = 1.0;
  double init_vel_std = 1.0;
};

/// Constant-velocity Kalman filter in `Dim` dimensions. State is
/// [position; velocity]; process noise is discrete white acceleration.
template <int Dim>
class CvKalman {
 public:
  static constexpr int N = 2 * Dim;
  using State = Eigen::Matrix<double, N, 1>;
  using Cov = Eigen::Matrix<double, N, N>;
  using Pos = Eigen::Matrix<double, Dim, 1>;

  CvKalman() = default;
  explicit CvKalman(const KalmanParams& p) : params_(p) {}

  const KalmanParams& params() const { return params_; }
  const State& mean() const { return x_; }
  const Cov& covariance() const { return P_; }
  bool initialized() const { return init_; }
  /// Gain of the last update (zero before the first update).
  const Eigen::Matrix<double, N, Eigen::Dynamic>& gain() const { return K_; }

  void reset(const Pos& pos, const Pos& vel) {
    x_.template head<Dim>() = pos;
    x_.template tail<Dim>() = vel;
    P_.setZero();
    P_.template topLeftCorner<Dim, Dim>().diagonal().setConstant(sq(params_.init_pos_std));
    P_.template bottomRightCorner<Dim, Dim>().diagonal().setConstant(sq(params_.init_vel_std));
    init_ = true;
  }

  void predict(double dt) {
    Cov F = Cov::Identity();
    F.template topRightCorner<Dim, Dim>().diagonal().setConstant(dt);
    x_ = F * x_;
    P_ = F * P_ * F.transpose() + process_noise(dt);
    symmetrize();
  }

  /// Measurement update. `vel` is ignored unless params().measure_velocity.
  void update(const Pos& pos, const Pos& vel) {
    if (!init_) {
      reset(pos, vel);
      return;
    }
    const int m = params_.measure_velocity ? N : Dim;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, N);
    H.leftCols(m) = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd z(m);
    z.head(Dim) = pos;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, m);
    R.diagonal().head(Dim).setConstant(sq(params_.pos_std));
    if (params_.measure_velocity) {
      z.tail(Dim) = vel;
      R.diagonal().tail(Dim).setConstant(sq(params_.vel_std));
    }
    const Eigen::MatrixXd S = H * P_ * H.transpose() + R;
    // Pseudo-inverse keeps the zero-noise, zero-covariance case defined.
    const Eigen::MatrixXd PHt = P_ * H.transpose();
    K_ = S.completeOrthogonalDecomposition().solve(PHt.transpose()).transpose();
    x_ += K_ * (z - H * x_);
    // Joseph form stays PSD under rounding.
    const Cov IKH = Cov::Identity() - K_ * H;
    P_ = IKH * P_ * IKH.transpose() + K_ * R * K_.transpose();
    symmetrize();
  }

  /// Predict over dt, then update if a measurement is given.
  void step(double dt, const std::optional<std::pair<Pos, Pos>>& meas) {
    if (init_) {
      predict(dt);
    }
    if (meas) {
      update(meas->first, meas->second);
    }
  }

 private:
  static double sq(double v) { return v * v; }

  Cov process_noise(double dt) const {
    const double q = sq(params_.accel_std);
    Cov Q = Cov::Zero();
    Q.template topLeftCorner<Dim, Dim>().diagonal().setConstant(q * dt * dt * dt * dt / 4.0);
    Q.template topRightCorner<Dim, Dim>().diagonal().setConstant(q * dt * dt * dt / 2.0);
    Q.template bottomLeftCorner<Dim, Dim>().diagonal().setConstant(q * dt * dt * dt / 2.0);
    Q.template bottomRightCorner<Dim, Dim>().diagonal().setConstant(q * dt * dt);
    return Q;
  }

  void symmetrize() { P_ = 0.5 * (P_ + P_.transpose()).eval(); }

  KalmanParams params_;
  State x_ = State::Zero();
  Cov P_ = Cov::Zero();
  Eigen::Matrix<double, N, Eigen::Dynamic> K_ = Eigen::Matrix<double, N, Eigen::Dynamic>::Zero(N, 0);
  bool init_ = false;
};

using KalmanTracker = CvKalman<3>;
using Cov6 = Eigen::Matrix<double, 6, 6>;

/// Predict, then fuse a position + velocity measurement (if any).
void kalman_step(KalmanTracker& tr, const std::optional<std::pair<Vec3, Vec3>>& meas, double dt);

Vec3 tracked_position(const KalmanTracker& tr);
Vec3 tracked_velocity(const KalmanTracker& tr);

/// r + sqrt(largest eigenvalue of the position block).
double inflated_radius(double r, const Cov6& covariance);

}  // namespace lswarm
