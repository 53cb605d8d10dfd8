#include <catch2/catch_amalgamated.hpp>

#include "axygate/operators.hpp"
#include "axygate/units.hpp"

using namespace axygate;
using Catch::Approx;

TEST_CASE("thermal_state", "[operators]") {
  SECTION("nbar = 0 is the ground-state projector") {
    const auto r = thermal_state(0.0, 6);
    CHECK(r(0, 0).real() == Approx(1.0));
    CHECK(std::abs(r.trace().real() - 1.0) < 1e-15);
  }
  SECTION("nbar = 0.2 ground population ~ 1/1.2 before truncation") {
    const auto r = thermal_state(0.2, 30);
    CHECK(r(0, 0).real() == Approx(1.0 / 1.2).epsilon(1e-9));
  }
  SECTION("mean phonon number close to nbar within the truncation tail") {
    const auto r = thermal_state(0.2, 12);
    double mean = 0.0;
    for (int n = 0; n < 12; ++n) mean += n * r(n, n).real();
    CHECK(mean == Approx(0.2).margin(5e-7));
  }
  SECTION("tail weight formula") {
    CHECK(thermal_tail(0.2, 8) == Approx(std::pow(1.0 / 6.0, 8)).epsilon(1e-12));
  }
  SECTION("rejects bad input") {
    CHECK_THROWS_AS(thermal_state(0.2, 1), std::invalid_argument);
    CHECK_THROWS_AS(thermal_state(-0.1, 8), std::invalid_argument);
  }
}

TEST_CASE("operator_fidelity", "[operators]") {
  const MatrixXcd id = MatrixXcd::Identity(2, 2);
  SECTION("F(A, A) = 1") {
    MatrixXcd a = MatrixXcd::Random(4, 4);
    CHECK(operator_fidelity(a, a) == Approx(1.0).epsilon(1e-12));
  }
  SECTION("identity vs sigma_x is 0") {
    MatrixXcd sx = MatrixXcd::Zero(2, 2);
    sx(0, 1) = 1;
    sx(1, 0) = 1;
    CHECK(operator_fidelity(id, sx) == Approx(0.0).margin(1e-15));
  }
  SECTION("global phase invariance") {
    MatrixXcd u = MatrixXcd::Random(4, 4);
    CHECK(operator_fidelity(u, std::polar(1.0, 1.234) * u) == Approx(1.0).epsilon(1e-12));
  }
  SECTION("zero-norm input rejected") {
    CHECK_THROWS_AS(operator_fidelity(id, MatrixXcd::Zero(2, 2)), std::invalid_argument);
  }
}

TEST_CASE("trace_out_motion and kron basics", "[operators]") {
  const Eigen::Vector4cd psi = (Eigen::Vector4cd() << 0.5, 0.5, 0.5, 0.5).finished();
  const MatrixXcd rq = psi * psi.adjoint();
  const MatrixXcd rho = kron(rq, kron(thermal_state(0.3, 4), thermal_state(0.1, 3)));
  const Eigen::Matrix4cd back = trace_out_motion(rho, 4, 3);
  CHECK((back - rq).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("hermitian_propagator matches series for small angles", "[operators]") {
  MatrixXcd h = MatrixXcd::Random(5, 5);
  h = (h + h.adjoint()).eval();
  const MatrixXcd u = hermitian_propagator(h, 1e-4);
  const MatrixXcd approx = MatrixXcd::Identity(5, 5) - std::complex<double>(0, 1e-4) * h -
                           0.5e-8 * (h * h);
  CHECK((u - approx).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((u * u.adjoint() - MatrixXcd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-13);
}
