#include <doctest.h>

#include <cmath>
#include <random>

#include "lswarm/kalman.hpp"

using namespace lswarm;

namespace {

bool psd(const Cov6& P) {
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  Eigen::SelfAdjointEigenSolver<Cov6> es(P, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-9;
}

}  // namespace

TEST_CASE("zero noise follows exact measurements") {
  KalmanParams p;
  p.accel_std = 0.0;
  p.pos_std = 0.0;
  p.vel_std = 0.0;
  KalmanTracker tr(p);
  const Vec3 v{1.0, -0.5, 0.25};
  for (int k = 0; k < 50; ++k) {
    const double t = 0.1 * k;
    const Vec3 pos = Vec3{3, 4, 5} + v * t;
    kalman_step(tr, std::make_pair(pos, v), 0.1);
    CHECK(distance(tracked_position(tr), pos) < 1e-9);
    CHECK(distance(tracked_velocity(tr), v) < 1e-9);
    CHECK(psd(tr.covariance()));
  }
}

TEST_CASE("predict-only never shrinks the covariance trace") {
  KalmanTracker tr;
  kalman_step(tr, std::make_pair(Vec3{0, 0, 0}, Vec3{1, 0, 0}), 0.05);
  double prev = tr.covariance().trace();
  for (int k = 0; k < 100; ++k) {
    kalman_step(tr, std::nullopt, 0.05);
    const double t = tr.covariance().trace();
    CHECK(t >= prev);
    CHECK(psd(tr.covariance()));
    prev = t;
  }
}

TEST_CASE("covariance stays symmetric PSD under noisy updates") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.3);
  KalmanTracker tr;
  for (int k = 0; k < 400; ++k) {
    const Vec3 truth{0.5 * k * 0.05, 0, 5};
    const bool seen = k % 7 != 3;
    if (seen) {
      kalman_step(tr, std::make_pair(truth + Vec3{n(rng), n(rng), n(rng)}, Vec3{0.5 + n(rng), n(rng), n(rng)}),
                  0.05);
    } else {
      kalman_step(tr, std::nullopt, 0.05);
    }
    CHECK(psd(tr.covariance()));
  }
}

TEST_CASE("steady-state gain matches the closed-form alpha-beta filter") {
  for (const double sw : {0.05, 0.5, 3.0}) {
    for (const double sv : {0.02, 0.3}) {
      for (const double dt : {0.05, 0.5}) {
        KalmanParams p;
        p.accel_std = sw;
        p.pos_std = sv;
        p.measure_velocity = false;
        CvKalman<1> kf(p);
        Eigen::Matrix<double, 1, 1> z;
        z << 0.0;
        kf.update(z, z);
        for (int k = 0; k < 20000; ++k) {
          kf.predict(dt);
          kf.update(z, z);
        }
        const double lam = sw * dt * dt / sv;
        const double root = std::sqrt(lam * lam + 8.0 * lam);
        const double alpha = -(lam * lam + 8.0 * lam - (lam + 4.0) * root) / 8.0;
        const double beta = (lam * lam + 4.0 * lam - lam * root) / 4.0;
        CAPTURE(lam);
        CHECK(kf.gain()(0, 0) == doctest::Approx(alpha).epsilon(1e-6));
        CHECK(kf.gain()(1, 0) * dt == doctest::Approx(beta).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("inflated_radius") {
  Cov6 P = Cov6::Zero();
  CHECK(inflated_radius(0.5, P) == doctest::Approx(0.5));
  P.topLeftCorner<3, 3>() = 0.09 * Eigen::Matrix3d::Identity();
  CHECK(inflated_radius(0.5, P) == doctest::Approx(0.8));
  P.setZero();
  P.diagonal() << 4, 1, 1, 9, 9, 9;
  CHECK(inflated_radius(0.5, P) == doctest::Approx(2.5));
  // velocity block is ignored
  P.setZero();
  P.diagonal() << 0, 0, 0, 100, 100, 100;
  CHECK(inflated_radius(1.0, P) == doctest::Approx(1.0));
}

TEST_CASE("inflated_radius is monotone in the Loewner order") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int k = 0; k < 500; ++k) {
    Cov6 a = Cov6::Zero();
    Cov6 b = Cov6::Zero();
    for (int i = 0; i < 6; ++i) {
      a(i, i) = u(rng);
      b(i, i) = a(i, i) + u(rng);
    }
    CHECK(inflated_radius(0.5, b) >= inflated_radius(0.5, a));
  }
}
