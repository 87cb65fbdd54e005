#include "csifb/cs_baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "csifb/rng.hpp"

namespace csifb {

namespace {

/// Largest squared singular value of phi via power iteration on phi^T phi,
/// inflated by 1% so 1/L is a safe gradient step.
double lipschitz_estimate(const Eigen::MatrixXd& phi) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(phi.cols()).normalized();
  double lam = 0.0;
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd w = phi.transpose() * (phi * v);
    const double n = w.norm();
    if (n == 0.0) return 1.0;
    lam = n;
    v = w / n;
  }
  return lam * 1.01;
}

double lasso_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                       const Eigen::VectorXd& x, double lambda) {
  return 0.5 * (y - phi * x).squaredNorm() + lambda * x.lpNorm<1>();
}

/// Forward-difference TV gradient pair for one plane (Neumann boundary).
void tv_grad(const Eigen::VectorXd& u, int rows, int cols, Eigen::VectorXd& gx,
             Eigen::VectorXd& gy) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      gx(i) = (c + 1 < cols) ? u(i + 1) - u(i) : 0.0;
      gy(i) = (r + 1 < rows) ? u(i + cols) - u(i) : 0.0;
    }
}

/// Discrete divergence, the negative adjoint of tv_grad:
/// (div p)(i) = px(i) - px(i-1) + py(i) - py(i-cols).
void tv_div(const Eigen::VectorXd& px, const Eigen::VectorXd& py, int rows, int cols,
            Eigen::VectorXd& div) {
  div.setZero();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) {
        div(i) += px(i);
        div(i + 1) -= px(i);
      }
      if (r + 1 < rows) {
        div(i) += py(i);
        div(i + cols) -= py(i);
      }
    }
}

double frame_anisotropic_tv(const Eigen::VectorXd& u, int rows, int cols) {
  double tv = 0.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) tv += std::fabs(u(i + 1) - u(i));
      if (r + 1 < rows) tv += std::fabs(u(i + cols) - u(i));
    }
  return tv;
}

}  // namespace

SensingMatrix make_sensing_matrix(int m, int n, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("make_sensing_matrix: M must be >= 1");
  if (m >= 2 * n)
    throw std::invalid_argument("make_sensing_matrix: M = " + std::to_string(m) +
                                " >= 2N = " + std::to_string(2 * n) + ", not a compression");
  SensingMatrix s;
  s.seed = seed;
  s.phi.resize(m, 2 * n);
  Rng rng(seed);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(m));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < 2 * n; ++c) s.phi(r, c) = sigma * rng.gaussian();
  return s;
}

double soft_threshold(double v, double theta) {
  if (v > theta) return v - theta;
  if (v < -theta) return v + theta;
  return 0.0;
}

RecoveryResult lasso_recover(const Eigen::VectorXd& y, const SensingMatrix& phi,
                             const RecoveryConfig& cfg) {
  if (cfg.algorithm != RecoveryAlgorithm::kLassoIsta &&
      cfg.algorithm != RecoveryAlgorithm::kLassoFista)
    throw std::invalid_argument("lasso_recover: wrong algorithm in config");
  const bool fista = cfg.algorithm == RecoveryAlgorithm::kLassoFista;
  const Eigen::MatrixXd& a = phi.phi;
  const double lip = lipschitz_estimate(a);
  const double step = 1.0 / lip;
  const double thresh = cfg.lambda * step;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.cols());
  Eigen::VectorXd momentum = x;
  Eigen::VectorXd best = x;
  double best_obj = lasso_objective(y, a, x, cfg.lambda);
  double t = 1.0;

  RecoveryResult res;
  for (res.iters = 1; res.iters <= cfg.max_iters; ++res.iters) {
    const Eigen::VectorXd& probe = fista ? momentum : x;
    Eigen::VectorXd grad_pt = probe - step * (a.transpose() * (a * probe - y));
    Eigen::VectorXd x_next(grad_pt.size());
    for (Eigen::Index i = 0; i < grad_pt.size(); ++i)
      x_next(i) = soft_threshold(grad_pt(i), thresh);

    const double obj = lasso_objective(y, a, x_next, cfg.lambda);
    if (cfg.track_objective) res.objective_trace.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best = x_next;
    }

    const double change = (x_next - x).norm();
    const double ref = std::max(x_next.norm(), 1e-12);
    if (fista) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      momentum = x_next + ((t - 1.0) / t_next) * (x_next - x);
      t = t_next;
    }
    x = std::move(x_next);
    if (cfg.tol > 0.0 && change < cfg.tol * ref) break;
  }
  res.x = std::move(best);
  return res;
}

Eigen::VectorXd tv_prox_plane(const Eigen::VectorXd& v, int rows, int cols, double mu,
                              int iters) {
  if (mu <= 0.0) return v;
  const int n = rows * cols;
  Eigen::VectorXd px = Eigen::VectorXd::Zero(n), py = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd div(n), u(n), gx(n), gy(n);
  // projected dual ascent; 1/(8 mu) is the safe step for the 2-D
  // difference operator (||D||^2 <= 8)
  const double step = 1.0 / (8.0 * mu);
  for (int k = 0; k < iters; ++k) {
    tv_div(px, py, rows, cols, div);
    u = v + mu * div;  // current primal estimate v - mu * D^T p
    tv_grad(u, rows, cols, gx, gy);
    for (int i = 0; i < n; ++i) {
      px(i) = std::clamp(px(i) + step * gx(i), -1.0, 1.0);
      py(i) = std::clamp(py(i) + step * gy(i), -1.0, 1.0);
    }
  }
  tv_div(px, py, rows, cols, div);
  return v + mu * div;
}

RecoveryResult tv_recover(const Eigen::VectorXd& y, const SensingMatrix& phi,
                          const RecoveryConfig& cfg) {
  if (cfg.algorithm != RecoveryAlgorithm::kTvProxGrad)
    throw std::invalid_argument("tv_recover: wrong algorithm in config");
  const int rows = cfg.tv_rows;
  const int cols = cfg.tv_cols;
  if (rows * cols * 2 != phi.n2())
    throw std::invalid_argument("tv_recover: plane shape " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " does not tile 2N = " +
                                std::to_string(phi.n2()));
  const Eigen::MatrixXd& a = phi.phi;
  const double lip = lipschitz_estimate(a);
  const double step = 1.0 / lip;
  const int plane = rows * cols;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.cols());
  RecoveryResult res;
  for (res.iters = 1; res.iters <= cfg.max_iters; ++res.iters) {
    Eigen::VectorXd grad_pt = x - step * (a.transpose() * (a * x - y));
    Eigen::VectorXd x_next(a.cols());
    if (cfg.lambda > 0.0) {
      x_next.head(plane) =
          tv_prox_plane(grad_pt.head(plane), rows, cols, cfg.lambda * step, cfg.tv_prox_iters);
      x_next.tail(plane) =
          tv_prox_plane(grad_pt.tail(plane), rows, cols, cfg.lambda * step, cfg.tv_prox_iters);
    } else {
      x_next = grad_pt;
    }
    if (cfg.track_objective) {
      double obj = 0.5 * (y - a * x_next).squaredNorm();
      if (cfg.lambda > 0.0)
        obj += cfg.lambda * (frame_anisotropic_tv(x_next.head(plane), rows, cols) +
                             frame_anisotropic_tv(x_next.tail(plane), rows, cols));
      res.objective_trace.push_back(obj);
    }
    const double change = (x_next - x).norm();
    const double ref = std::max(x_next.norm(), 1e-12);
    x = std::move(x_next);
    if (cfg.tol > 0.0 && change < cfg.tol * ref) break;
  }
  res.x = std::move(x);
  return res;
}

RecoveryResult amp_recover(const Eigen::VectorXd& y, const SensingMatrix& phi,
                           const RecoveryConfig& cfg) {
  if (cfg.algorithm != RecoveryAlgorithm::kAmp)
    throw std::invalid_argument("amp_recover: wrong algorithm in config");
  const Eigen::MatrixXd& a = phi.phi;
  const int m = phi.m();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.cols());
  Eigen::VectorXd z = y;
  Eigen::VectorXd best = x;
  double best_resid = z.norm();
  std::vector<double> resid_history{best_resid};

  RecoveryResult res;
  for (res.iters = 1; res.iters <= cfg.max_iters; ++res.iters) {
    const Eigen::VectorXd pseudo = x + a.transpose() * z;
    const double theta = cfg.amp_alpha * z.norm() / std::sqrt(static_cast<double>(m));
    Eigen::VectorXd x_next(pseudo.size());
    int support = 0;
    for (Eigen::Index i = 0; i < pseudo.size(); ++i) {
      x_next(i) = soft_threshold(pseudo(i), theta);
      if (x_next(i) != 0.0) ++support;
    }
    // Onsager correction keeps the effective noise Gaussian across
    // iterations; without it AMP measurably degrades (see tests)
    const double onsager = cfg.amp_onsager ? static_cast<double>(support) / m : 0.0;
    Eigen::VectorXd z_next = y - a * x_next + onsager * z;

    const double change = (x_next - x).norm();
    const double ref = std::max(x_next.norm(), 1e-12);
    x = std::move(x_next);
    z = std::move(z_next);

    const double resid = z.norm();
    if (resid < best_resid) {
      best_resid = resid;
      best = x;
    }
    resid_history.push_back(resid);
    const std::size_t k = resid_history.size();
    if (k > 10 && resid > 10.0 * resid_history[k - 11]) {
      res.diverged = true;
      break;
    }
    if (cfg.tol > 0.0 && change < cfg.tol * ref) break;
  }
  res.x = res.diverged ? best : x;
  return res;
}

RecoveryResult recover(const Eigen::VectorXd& y, const SensingMatrix& phi,
                       const RecoveryConfig& cfg) {
  switch (cfg.algorithm) {
    case RecoveryAlgorithm::kLassoIsta:
    case RecoveryAlgorithm::kLassoFista:
      return lasso_recover(y, phi, cfg);
    case RecoveryAlgorithm::kTvProxGrad:
      return tv_recover(y, phi, cfg);
    case RecoveryAlgorithm::kAmp:
      return amp_recover(y, phi, cfg);
  }
  throw std::logic_error("recover: unknown algorithm");
}

namespace {

Eigen::VectorXd stack_frame(const AngularDelayFrame& fr) {
  const int rows = static_cast<int>(fr.re.rows());
  const int cols = static_cast<int>(fr.re.cols());
  Eigen::VectorXd x(2 * rows * cols);
  int i = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) x(i++) = fr.re(r, c);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) x(i++) = fr.im(r, c);
  return x;
}

AngularDelayFrame unstack_frame(const Eigen::VectorXd& x, int rows, int cols,
                                const NormStats& stats) {
  AngularDelayFrame fr;
  fr.re.resize(rows, cols);
  fr.im.resize(rows, cols);
  fr.norm_offset = stats.offset;
  fr.norm_scale = stats.scale;
  int i = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) fr.re(r, c) = std::clamp(x(i++), 0.0, 1.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) fr.im(r, c) = std::clamp(x(i++), 0.0, 1.0);
  return fr;
}

}  // namespace

BaselineGroupResult baseline_recover_group(const ChannelGroup& group, const SensingMatrix& phi,
                                           const RecoveryConfig& cfg, const NormStats& stats) {
  if (group.frames.empty()) throw std::invalid_argument("baseline_recover_group: empty group");
  const int rows = static_cast<int>(group.frames[0].re.rows());
  const int cols = static_cast<int>(group.frames[0].re.cols());
  const int n2 = 2 * rows * cols;
  // the normalized value of a raw zero; recovery runs on the deviation
  // from this midline so zeros in the raw signal stay zeros
  const double midline = (0.0 - stats.offset) / stats.scale;

  BaselineGroupResult out;
  for (const auto& fr : group.frames) {
    const Eigen::VectorXd x_norm = stack_frame(fr);
    BaselineFrameResult frame_res;
    if (phi.m() >= n2) {
      // identity sensing escape hatch (CR = 1): no compression, direct copy
      frame_res.recovered = unstack_frame(x_norm, rows, cols, stats);
    } else {
      if (phi.n2() != n2)
        throw std::invalid_argument("baseline_recover_group: sensing matrix is " +
                                    std::to_string(phi.n2()) + " wide, frame needs " +
                                    std::to_string(n2));
      const Eigen::VectorXd deviation = x_norm.array() - midline;
      const Eigen::VectorXd y = phi.phi * deviation;
      const RecoveryResult rec = recover(y, phi, cfg);
      const Eigen::VectorXd x_hat = rec.x.array() + midline;
      frame_res.recovered = unstack_frame(x_hat, rows, cols, stats);
      frame_res.diverged = rec.diverged;
    }
    out.frames.push_back(std::move(frame_res));
  }
  return out;
}

double tune_lambda(const std::vector<ChannelGroup>& val_groups, const SensingMatrix& phi,
                   RecoveryConfig cfg, const NormStats& stats,
                   const std::vector<double>& grid, int max_groups) {
  if (val_groups.empty() || grid.empty())
    throw std::invalid_argument("tune_lambda: empty validation set or grid");
  const int n_groups = std::min<int>(max_groups, static_cast<int>(val_groups.size()));
  const double midline = (0.0 - stats.offset) / stats.scale;

  // measurement scale: mean peak correlation of the centered signal
  double meas_scale = 0.0;
  int n_frames = 0;
  for (int gi = 0; gi < n_groups; ++gi) {
    for (const auto& fr : val_groups[gi].frames) {
      Eigen::VectorXd d(2 * fr.re.size());
      int i = 0;
      for (Eigen::Index r = 0; r < fr.re.rows(); ++r)
        for (Eigen::Index c = 0; c < fr.re.cols(); ++c) d(i++) = fr.re(r, c) - midline;
      for (Eigen::Index r = 0; r < fr.im.rows(); ++r)
        for (Eigen::Index c = 0; c < fr.im.cols(); ++c) d(i++) = fr.im(r, c) - midline;
      meas_scale += (phi.phi.transpose() * (phi.phi * d)).cwiseAbs().maxCoeff();
      ++n_frames;
    }
  }
  meas_scale = std::max(meas_scale / n_frames, 1e-12);

  double best_lambda = grid.front() * meas_scale;
  double best_err = std::numeric_limits<double>::infinity();
  for (const double g : grid) {
    cfg.lambda = g * meas_scale;
    double err = 0.0, sig = 0.0;
    for (int gi = 0; gi < n_groups; ++gi) {
      const auto result = baseline_recover_group(val_groups[gi], phi, cfg, stats);
      for (std::size_t t = 0; t < result.frames.size(); ++t) {
        const auto truth = val_groups[gi].frames[t].denormalize();
        const auto rec = result.frames[t].recovered.denormalize();
        err += (truth - rec).squaredNorm();
        sig += truth.squaredNorm();
      }
    }
    const double nmse = err / std::max(sig, 1e-300);
    if (nmse < best_err) {
      best_err = nmse;
      best_lambda = cfg.lambda;
    }
  }
  return best_lambda;
}

}  // namespace csifb
