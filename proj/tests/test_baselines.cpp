#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "csifb/cs_baselines.hpp"
#include "csifb/evaluate.hpp"
#include "csifb/rng.hpp"

using namespace csifb;

namespace {

double nmse_db(const Eigen::VectorXd& truth, const Eigen::VectorXd& est) {
  return 10.0 * std::log10((truth - est).squaredNorm() / truth.squaredNorm());
}

Eigen::VectorXd planted_sparse(int n, int k, Rng& rng) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < k; ++i) {
    int pos;
    do {
      pos = static_cast<int>(rng.below(n));
    } while (x(pos) != 0.0);
    x(pos) = rng.gaussian() + (rng.uniform() < 0.5 ? 2.0 : -2.0);
  }
  return x;
}

}  // namespace

TEST_CASE("sensing matrix shape, CR, and determinism") {
  const SensingMatrix s = make_sensing_matrix(128, 1024, 7);
  CHECK(s.phi.rows() == 128);
  CHECK(s.phi.cols() == 2048);
  CHECK(s.cr() == doctest::Approx(1.0 / 16));

  const SensingMatrix t = make_sensing_matrix(128, 1024, 7);
  CHECK(s.phi == t.phi);

  CHECK_THROWS_AS(make_sensing_matrix(64, 32, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_sensing_matrix(0, 32, 1), std::invalid_argument);
}

TEST_CASE("sensing matrix columns have unit norm on average") {
  const SensingMatrix s = make_sensing_matrix(200, 128, 3);
  double acc = 0.0;
  for (int c = 0; c < 100; ++c) acc += s.phi.col(c).norm();
  CHECK(acc / 100 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("soft threshold: sign preserved, magnitude shrunk exactly") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-3.0, 3.0);
    const double theta = rng.uniform(0.0, 2.0);
    const double out = soft_threshold(v, theta);
    CHECK(std::fabs(out) == std::max(std::fabs(v) - theta, 0.0));
    if (out != 0.0) CHECK(out * v > 0.0);
  }
}

TEST_CASE("a dominating lambda collapses the LASSO solution to zero") {
  const SensingMatrix s = make_sensing_matrix(16, 32, 11);
  Rng rng(4);
  Eigen::VectorXd y(16);
  for (int i = 0; i < 16; ++i) y(i) = rng.gaussian();
  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kLassoIsta;
  cfg.lambda = (s.phi.transpose() * y).cwiseAbs().maxCoeff() * 1.0001;
  cfg.max_iters = 50;
  const RecoveryResult res = lasso_recover(y, s, cfg);
  CHECK(res.x.norm() == 0.0);
}

TEST_CASE("planted 4-sparse recovery reaches -30 dB with 2000 iterations") {
  Rng rng(9);
  const SensingMatrix s = make_sensing_matrix(64, 64, 13);  // M=64, 2N=128
  const Eigen::VectorXd x = planted_sparse(128, 4, rng);
  const Eigen::VectorXd y = s.phi * x;
  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kLassoFista;
  cfg.lambda = 1e-4;
  cfg.max_iters = 2000;
  cfg.tol = 0.0;
  const RecoveryResult res = lasso_recover(y, s, cfg);
  CHECK(nmse_db(x, res.x) < -30.0);

  // plain ISTA converges far slower at this lambda; it must still make
  // steady progress toward the same solution
  cfg.algorithm = RecoveryAlgorithm::kLassoIsta;
  cfg.max_iters = 500;
  const double early = nmse_db(x, lasso_recover(y, s, cfg).x);
  cfg.max_iters = 2000;
  const double late = nmse_db(x, lasso_recover(y, s, cfg).x);
  CHECK(late < early);
  CHECK(late < -3.0);
}

TEST_CASE("one ISTA step from zero equals the closed-form prox of the gradient") {
  Eigen::MatrixXd phi(4, 8);
  phi << 1, 0, 2, -1, 0, 1, 0, 1,
         0, 1, -1, 0, 2, 0, 1, 0,
         1, 1, 0, 0, -1, 2, 0, 1,
         0, -1, 1, 1, 0, 0, 2, -1;
  SensingMatrix s;
  s.phi = phi;
  Eigen::VectorXd y(4);
  y << 1.0, -0.5, 2.0, 0.25;

  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kLassoIsta;
  cfg.lambda = 0.3;
  cfg.max_iters = 1;
  cfg.tol = 0.0;
  const RecoveryResult res = lasso_recover(y, s, cfg);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(phi.transpose() * phi);
  const double lip = eig.eigenvalues().maxCoeff() * 1.01;
  const Eigen::VectorXd grad_pt = phi.transpose() * y / lip;
  for (int i = 0; i < 8; ++i)
    CHECK(res.x(i) == doctest::Approx(soft_threshold(grad_pt(i), cfg.lambda / lip))
                          .epsilon(1e-6));
}

TEST_CASE("ISTA objective is non-increasing on 20 random instances") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const SensingMatrix s = make_sensing_matrix(24, 32, seed * 97);
    const Eigen::VectorXd x = planted_sparse(64, 6, rng);
    Eigen::VectorXd y = s.phi * x;
    for (int i = 0; i < y.size(); ++i) y(i) += 0.01 * rng.gaussian();

    RecoveryConfig cfg;
    cfg.algorithm = RecoveryAlgorithm::kLassoIsta;
    cfg.lambda = 1e-3;
    cfg.max_iters = 200;
    cfg.tol = 0.0;
    cfg.track_objective = true;
    const RecoveryResult res = lasso_recover(y, s, cfg);
    REQUIRE(res.objective_trace.size() == 200);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
      CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("FISTA's best-so-far objective never worsens") {
  Rng rng(31);
  const SensingMatrix s = make_sensing_matrix(32, 48, 77);
  const Eigen::VectorXd x = planted_sparse(96, 8, rng);
  const Eigen::VectorXd y = s.phi * x;
  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kLassoFista;
  cfg.lambda = 1e-3;
  cfg.max_iters = 300;
  cfg.tol = 0.0;
  cfg.track_objective = true;
  const RecoveryResult res = lasso_recover(y, s, cfg);
  double best = std::numeric_limits<double>::infinity();
  for (double obj : res.objective_trace) best = std::min(best, obj);
  // the returned iterate is the best one seen
  const double final_obj =
      0.5 * (y - s.phi * res.x).squaredNorm() + cfg.lambda * res.x.lpNorm<1>();
  CHECK(final_obj == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("TV with mu = 0 reduces to least squares with monotone residual") {
  Rng rng(7);
  const SensingMatrix s = make_sensing_matrix(24, 32, 5);
  Eigen::VectorXd y(24);
  for (int i = 0; i < 24; ++i) y(i) = rng.gaussian();
  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kTvProxGrad;
  cfg.lambda = 0.0;
  cfg.max_iters = 100;
  cfg.tol = 0.0;
  cfg.tv_rows = 8;
  cfg.tv_cols = 4;
  cfg.track_objective = true;
  const RecoveryResult res = tv_recover(y, s, cfg);
  CHECK(res.x.size() == 64);
  for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
    CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("TV recovers a planted piecewise-constant pair of planes") {
  const int rows = 8, cols = 8, n2 = 2 * rows * cols;
  Eigen::VectorXd x(n2);
  for (int p = 0; p < 2; ++p)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        x(p * rows * cols + r * cols + c) = p == 0 ? (r < 4 ? 1.5 : -0.5)
                                                   : (c < 5 ? 0.8 : -1.2);

  const SensingMatrix s = make_sensing_matrix(n2 / 4, n2 / 2, 21);  // CR 1/4
  const Eigen::VectorXd y = s.phi * x;
  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kTvProxGrad;
  cfg.lambda = 2e-2;
  cfg.max_iters = 2000;
  cfg.tol = 0.0;
  cfg.tv_rows = rows;
  cfg.tv_cols = cols;
  const RecoveryResult res = tv_recover(y, s, cfg);
  CHECK(res.x.size() == n2);
  CHECK(nmse_db(x, res.x) < -20.0);
}

TEST_CASE("tv_prox_plane never increases the prox objective") {
  Rng rng(3);
  const int rows = 6, cols = 5;
  Eigen::VectorXd v(rows * cols);
  for (int i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
  auto tv = [&](const Eigen::VectorXd& u) {
    double acc = 0.0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        if (c + 1 < cols) acc += std::fabs(u(r * cols + c + 1) - u(r * cols + c));
        if (r + 1 < rows) acc += std::fabs(u((r + 1) * cols + c) - u(r * cols + c));
      }
    return acc;
  };
  const double mu = 0.25;
  const Eigen::VectorXd u = tv_prox_plane(v, rows, cols, mu, 20);
  const double at_v = mu * tv(v);
  const double at_u = 0.5 * (u - v).squaredNorm() + mu * tv(u);
  CHECK(at_u <= at_v + 1e-12);
}

TEST_CASE("AMP maps zero measurements to zero") {
  const SensingMatrix s = make_sensing_matrix(32, 64, 17);
  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kAmp;
  cfg.max_iters = 50;
  const RecoveryResult res = amp_recover(Eigen::VectorXd::Zero(32), s, cfg);
  CHECK(res.x.norm() == 0.0);
}

TEST_CASE("AMP recovers a planted 8-sparse signal within 50 iterations") {
  Rng rng(19);
  const SensingMatrix s = make_sensing_matrix(96, 128, 23);  // 2N=256
  const Eigen::VectorXd x = planted_sparse(256, 8, rng);
  const Eigen::VectorXd y = s.phi * x;
  RecoveryConfig cfg;
  cfg.algorithm = RecoveryAlgorithm::kAmp;
  cfg.max_iters = 50;
  cfg.tol = 0.0;
  cfg.amp_alpha = 1.8;  // stable threshold multiplier for M/2N = 0.375
  const RecoveryResult res = amp_recover(y, s, cfg);
  CHECK_FALSE(res.diverged);
  CHECK(nmse_db(x, res.x) < -20.0);
}

TEST_CASE("dropping the Onsager term measurably degrades AMP") {
  double with_sum = 0.0, without_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const SensingMatrix s = make_sensing_matrix(96, 128, 1000 + seed);
    const Eigen::VectorXd x = planted_sparse(256, 8, rng);
    const Eigen::VectorXd y = s.phi * x;
    RecoveryConfig cfg;
    cfg.algorithm = RecoveryAlgorithm::kAmp;
    cfg.max_iters = 50;
    cfg.tol = 0.0;
    cfg.amp_alpha = 1.8;
    with_sum += nmse_db(x, amp_recover(y, s, cfg).x);
    cfg.amp_onsager = false;
    without_sum += nmse_db(x, amp_recover(y, s, cfg).x);
  }
  CHECK(with_sum / 5 < without_sum / 5 - 3.0);
}

TEST_CASE("AMP divergence flag rate stays under 5% over 100 seeds") {
  int flags = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const SensingMatrix s = make_sensing_matrix(48, 64, 5000 + seed);
    const Eigen::VectorXd x = planted_sparse(128, 6, rng);
    Eigen::VectorXd y = s.phi * x;
    for (int i = 0; i < y.size(); ++i) y(i) += 0.02 * rng.gaussian();
    RecoveryConfig cfg;
    cfg.algorithm = RecoveryAlgorithm::kAmp;
    cfg.max_iters = 100;
    cfg.tol = 0.0;
    if (amp_recover(y, s, cfg).diverged) ++flags;
  }
  CHECK(flags < 5);
}

TEST_CASE("recoveries are deterministic functions of their inputs") {
  Rng rng(41);
  const SensingMatrix s = make_sensing_matrix(24, 32, 3);
  const Eigen::VectorXd x = planted_sparse(64, 5, rng);
  const Eigen::VectorXd y = s.phi * x;
  for (const auto alg : {RecoveryAlgorithm::kLassoIsta, RecoveryAlgorithm::kLassoFista,
                         RecoveryAlgorithm::kTvProxGrad, RecoveryAlgorithm::kAmp}) {
    RecoveryConfig cfg;
    cfg.algorithm = alg;
    cfg.lambda = 1e-3;
    cfg.max_iters = 60;
    cfg.tv_rows = 8;
    cfg.tv_cols = 4;
    const RecoveryResult a = recover(y, s, cfg);
    const RecoveryResult b = recover(y, s, cfg);
    CHECK(a.x == b.x);
  }
}

TEST_CASE("identity sensing escape hatch reconstructs exactly") {
  ScenarioConfig scen;
  scen.seed = 61;
  const Dataset ds = generate_dataset(scen, {4, 1, 2});
  SensingMatrix identity;
  identity.phi = Eigen::MatrixXd::Identity(128, 128);
  RecoveryConfig cfg;
  const BaselineGroupResult res =
      baseline_recover_group(ds.test[0], identity, cfg, ds.stats);
  double err = 0.0, sig = 0.0;
  for (std::size_t t = 0; t < res.frames.size(); ++t) {
    const auto truth = ds.test[0].frames[t].denormalize();
    err += (truth - res.frames[t].recovered.denormalize()).squaredNorm();
    sig += truth.squaredNorm();
  }
  const double db = err == 0.0 ? -300.0 : 10.0 * std::log10(err / sig);
  CHECK(db < -80.0);
}

TEST_CASE("LASSO NMSE improves from CR 1/64 to CR 1/16 on channel data") {
  ScenarioConfig scen;
  scen.seed = 71;
  const Dataset ds = generate_dataset(scen, {8, 4, 12});
  auto run = [&](double cr) {
    EvalOptions opts;
    opts.max_groups = 12;
    opts.with_runtime = false;
    return evaluate_baseline(ds, RecoveryAlgorithm::kLassoFista, cr, opts, 800).nmse_db;
  };
  CHECK(run(1.0 / 16) < run(1.0 / 64));
}
