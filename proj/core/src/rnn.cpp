#include "nqs/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "nqs/io.hpp"
#include "nqs/optim.hpp"
#include "nqs/rng.hpp"

namespace nqs {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void sigmoid_inplace(Eigen::MatrixXd& a) { a.array() = 1.0 / (1.0 + (-a.array()).exp()); }

// One-hot inputs turn the x-block of a combined [h; x] kernel into a column
// gather: class c reads column n_hidden + c.
void add_input_columns(const Eigen::MatrixXd& w, int n_hidden, const std::vector<int>& x_cls,
                       Eigen::MatrixXd& a) {
  for (int i = 0; i < static_cast<int>(x_cls.size()); ++i)
    a.col(i) += w.col(n_hidden + x_cls[i]);
}

// One walk step over a batch of hidden states. log_p holds both conditional
// branches in log form so ratio and gradient paths never re-exponentiate
// small probabilities.
struct StepTrace {
  Eigen::MatrixXd z, r, g;  // gate activations [n_hidden, B]; kept only for backprop
  Eigen::MatrixXd s;        // state after the step [n_hidden, B]
  Eigen::MatrixXd log_p;    // [2, B]
  std::vector<int> out;     // occupation emitted at this step
};

void cell_forward(const GruParams& p, const Eigen::MatrixXd& s_prev,
                  const std::vector<int>& x_cls, bool keep_gates, StepTrace& t) {
  const int nh = p.n_hidden;
  const int b = static_cast<int>(x_cls.size());

  Eigen::MatrixXd z = p.w_update.leftCols(nh) * s_prev;
  z.colwise() += p.b_update;
  add_input_columns(p.w_update, nh, x_cls, z);
  sigmoid_inplace(z);

  Eigen::MatrixXd r = p.w_reset.leftCols(nh) * s_prev;
  r.colwise() += p.b_reset;
  add_input_columns(p.w_reset, nh, x_cls, r);
  sigmoid_inplace(r);

  Eigen::MatrixXd g = p.w_candidate.leftCols(nh) * r.cwiseProduct(s_prev);
  g.colwise() += p.b_candidate;
  add_input_columns(p.w_candidate, nh, x_cls, g);
  g.array() = g.array().tanh();

  t.s = s_prev + z.cwiseProduct(g - s_prev);

  // Two-class softmax through the logit difference; stable in log form.
  Eigen::RowVectorXd d = (p.u_out.row(0) - p.u_out.row(1)) * t.s;
  d.array() += p.c_out(0) - p.c_out(1);
  t.log_p.resize(2, b);
  for (int i = 0; i < b; ++i) {
    t.log_p(0, i) = -softplus(-d(i));
    t.log_p(1, i) = -softplus(d(i));
  }

  if (keep_gates) {
    t.z = std::move(z);
    t.r = std::move(r);
    t.g = std::move(g);
  }
}

// Input class consumed at step t: start token first, then the previous
// site's occupation.
std::vector<int> input_classes(const std::vector<StepTrace>& steps, int t) {
  if (t == 0) return std::vector<int>(steps[0].out.size(), 2);
  return steps[t - 1].out;
}

struct ForwardTrace {
  int batch = 0;
  std::vector<StepTrace> steps;
  std::vector<double> log_psi;
};

void check_sites(const RnnWavefunction& psi, const Configuration& sigma) {
  if (static_cast<int>(sigma.bits.size()) != psi.n_sites())
    throw std::invalid_argument("rnn: configuration size does not match the visit order");
}

ForwardTrace forward_trace(const RnnWavefunction& psi, std::span<const Configuration> sigmas,
                           bool keep_gates) {
  const int n = psi.n_sites();
  const int b = static_cast<int>(sigmas.size());
  for (const Configuration& sigma : sigmas) check_sites(psi, sigma);

  ForwardTrace trace;
  trace.batch = b;
  trace.steps.resize(n);
  trace.log_psi.assign(b, 0.0);

  Eigen::MatrixXd s_prev = Eigen::MatrixXd::Zero(psi.params.n_hidden, b);
  std::vector<int> x_cls(b, 2);
  for (int t = 0; t < n; ++t) {
    StepTrace& step = trace.steps[t];
    cell_forward(psi.params, t == 0 ? s_prev : trace.steps[t - 1].s, x_cls, keep_gates, step);
    step.out.resize(b);
    const int site = psi.order[t];
    for (int i = 0; i < b; ++i) {
      step.out[i] = sigmas[i].bits[site] ? 1 : 0;
      trace.log_psi[i] += 0.5 * step.log_p(step.out[i], i);
      x_cls[i] = step.out[i];
    }
  }
  return trace;
}

// Gradient of sum_i coeff_i log psi_i in the flat parameter layout.
std::vector<double> backward_pass(const GruParams& p, const std::vector<StepTrace>& steps,
                                  std::span<const double> coeff) {
  const int nh = p.n_hidden;
  const int n = static_cast<int>(steps.size());
  const int b = static_cast<int>(coeff.size());

  GruParams grad;
  grad.n_hidden = nh;
  grad.w_update = Eigen::MatrixXd::Zero(nh, nh + GruParams::kInputDim);
  grad.w_reset = grad.w_update;
  grad.w_candidate = grad.w_update;
  grad.b_update = Eigen::VectorXd::Zero(nh);
  grad.b_reset = grad.b_update;
  grad.b_candidate = grad.b_update;
  grad.u_out = Eigen::MatrixXd::Zero(2, nh);
  grad.c_out = Eigen::Vector2d::Zero();

  const Eigen::MatrixXd zero_state = Eigen::MatrixXd::Zero(nh, b);
  Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(nh, b);

  for (int t = n - 1; t >= 0; --t) {
    const StepTrace& step = steps[t];
    const Eigen::MatrixXd& s_prev = t == 0 ? zero_state : steps[t - 1].s;
    const std::vector<int> x_cls = input_classes(steps, t);

    // Softmax head: dlogits = coeff/2 (onehot - p).
    Eigen::MatrixXd dl = (-step.log_p.array().exp()).matrix();
    for (int i = 0; i < b; ++i) {
      dl(step.out[i], i) += 1.0;
      dl.col(i) *= 0.5 * coeff[i];
    }
    grad.u_out.noalias() += dl * step.s.transpose();
    grad.c_out += dl.rowwise().sum();
    ds.noalias() += p.u_out.transpose() * dl;

    // s = s_prev + z . (g - s_prev)
    Eigen::MatrixXd dz = ds.cwiseProduct(step.g - s_prev);
    Eigen::MatrixXd dg = ds.cwiseProduct(step.z);
    Eigen::MatrixXd ds_prev = ds - ds.cwiseProduct(step.z);

    // Candidate branch, through tanh and the reset product.
    Eigen::MatrixXd da = dg.cwiseProduct((1.0 - step.g.array().square()).matrix());
    grad.w_candidate.leftCols(nh).noalias() += da * step.r.cwiseProduct(s_prev).transpose();
    grad.b_candidate += da.rowwise().sum();
    for (int i = 0; i < b; ++i) grad.w_candidate.col(nh + x_cls[i]) += da.col(i);
    Eigen::MatrixXd dq = p.w_candidate.leftCols(nh).transpose() * da;
    Eigen::MatrixXd dr = dq.cwiseProduct(s_prev);
    ds_prev += dq.cwiseProduct(step.r);

    // Reset gate.
    da = dr.cwiseProduct(step.r).cwiseProduct((1.0 - step.r.array()).matrix());
    grad.w_reset.leftCols(nh).noalias() += da * s_prev.transpose();
    grad.b_reset += da.rowwise().sum();
    for (int i = 0; i < b; ++i) grad.w_reset.col(nh + x_cls[i]) += da.col(i);
    ds_prev.noalias() += p.w_reset.leftCols(nh).transpose() * da;

    // Update gate.
    da = dz.cwiseProduct(step.z).cwiseProduct((1.0 - step.z.array()).matrix());
    grad.w_update.leftCols(nh).noalias() += da * s_prev.transpose();
    grad.b_update += da.rowwise().sum();
    for (int i = 0; i < b; ++i) grad.w_update.col(nh + x_cls[i]) += da.col(i);
    ds_prev.noalias() += p.w_update.leftCols(nh).transpose() * da;

    ds = std::move(ds_prev);
  }
  return grad.flatten_params();
}

}  // namespace

std::size_t GruParams::n_params() const {
  const std::size_t nh = static_cast<std::size_t>(n_hidden);
  return 3 * nh * (nh + kInputDim) + 3 * nh + 2 * nh + 2;
}

std::vector<double> GruParams::flatten_params() const {
  std::vector<double> theta;
  theta.reserve(n_params());
  auto append = [&theta](const double* data, std::size_t count) {
    theta.insert(theta.end(), data, data + count);
  };
  append(w_update.data(), w_update.size());
  append(w_reset.data(), w_reset.size());
  append(w_candidate.data(), w_candidate.size());
  append(b_update.data(), b_update.size());
  append(b_reset.data(), b_reset.size());
  append(b_candidate.data(), b_candidate.size());
  append(u_out.data(), u_out.size());
  append(c_out.data(), c_out.size());
  return theta;
}

void GruParams::unflatten_params(std::span<const double> theta) {
  if (theta.size() != n_params())
    throw std::invalid_argument("rnn: parameter vector size mismatch");
  const double* src = theta.data();
  auto take = [&src](double* dst, std::size_t count) {
    std::copy(src, src + count, dst);
    src += count;
  };
  take(w_update.data(), w_update.size());
  take(w_reset.data(), w_reset.size());
  take(w_candidate.data(), w_candidate.size());
  take(b_update.data(), b_update.size());
  take(b_reset.data(), b_reset.size());
  take(b_candidate.data(), b_candidate.size());
  take(u_out.data(), u_out.size());
  take(c_out.data(), c_out.size());
}

Eigen::VectorXd gru_step(const GruParams& params, const Eigen::VectorXd& h,
                         const Eigen::VectorXd& x) {
  const int nh = params.n_hidden;
  if (h.size() != nh || x.size() != GruParams::kInputDim)
    throw std::invalid_argument("rnn: gru_step input size mismatch");
  Eigen::VectorXd hx(nh + GruParams::kInputDim);
  hx << h, x;
  Eigen::VectorXd z = params.w_update * hx + params.b_update;
  z.array() = 1.0 / (1.0 + (-z.array()).exp());
  Eigen::VectorXd r = params.w_reset * hx + params.b_reset;
  r.array() = 1.0 / (1.0 + (-r.array()).exp());
  Eigen::VectorXd rx(nh + GruParams::kInputDim);
  rx << r.cwiseProduct(h), x;
  Eigen::VectorXd g = params.w_candidate * rx + params.b_candidate;
  g.array() = g.array().tanh();
  return h + z.cwiseProduct(g - h);
}

Eigen::Vector2d conditional(const GruParams& params, const Eigen::VectorXd& h) {
  if (h.size() != params.n_hidden)
    throw std::invalid_argument("rnn: conditional input size mismatch");
  const double d = (params.u_out.row(0) - params.u_out.row(1)).dot(h) +
                   params.c_out(0) - params.c_out(1);
  const double p0 = 1.0 / (1.0 + std::exp(-d));
  return {p0, 1.0 - p0};
}

std::vector<int> snake_order(int lx, int ly) {
  if (lx < 1 || ly < 1) throw std::invalid_argument("rnn: lattice sides must be positive");
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(lx) * ly);
  for (int y = 0; y < ly; ++y)
    for (int x = 0; x < lx; ++x) order.push_back(y * lx + (y % 2 == 0 ? x : lx - 1 - x));
  return order;
}

RnnWavefunction make_rnn(int lx, int ly, int n_hidden, std::uint64_t seed) {
  if (n_hidden < 1) throw std::invalid_argument("rnn: n_hidden must be positive");
  RnnWavefunction psi;
  psi.order = snake_order(lx, ly);
  GruParams& p = psi.params;
  p.n_hidden = n_hidden;
  Rng rng(seed);
  auto glorot = [&rng](Eigen::MatrixXd& m, int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    m.resize(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k)
      m.data()[k] = limit * (2.0 * rng.uniform() - 1.0);
  };
  glorot(p.w_update, n_hidden, n_hidden + GruParams::kInputDim);
  glorot(p.w_reset, n_hidden, n_hidden + GruParams::kInputDim);
  glorot(p.w_candidate, n_hidden, n_hidden + GruParams::kInputDim);
  glorot(p.u_out, 2, n_hidden);
  p.b_update = Eigen::VectorXd::Zero(n_hidden);
  p.b_reset = Eigen::VectorXd::Zero(n_hidden);
  p.b_candidate = Eigen::VectorXd::Zero(n_hidden);
  p.c_out = Eigen::Vector2d::Zero();
  return psi;
}

double log_psi(const RnnWavefunction& psi, const Configuration& sigma) {
  return log_psi_batch(psi, std::span<const Configuration>(&sigma, 1))[0];
}

std::vector<double> log_psi_batch(const RnnWavefunction& psi,
                                  std::span<const Configuration> sigmas) {
  const int n = psi.n_sites();
  const int b = static_cast<int>(sigmas.size());
  for (const Configuration& sigma : sigmas) check_sites(psi, sigma);
  std::vector<double> out(b, 0.0);
  if (b == 0) return out;

  // Rolling state only; the full trace is not kept.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(psi.params.n_hidden, b);
  std::vector<int> x_cls(b, 2);
  StepTrace t;
  for (int step = 0; step < n; ++step) {
    cell_forward(psi.params, s, x_cls, false, t);
    const int site = psi.order[step];
    for (int i = 0; i < b; ++i) {
      const int occ = sigmas[i].bits[site] ? 1 : 0;
      out[i] += 0.5 * t.log_p(occ, i);
      x_cls[i] = occ;
    }
    s.swap(t.s);
  }
  return out;
}

std::vector<double> log_psi_gradient(const RnnWavefunction& psi, const Configuration& sigma) {
  const auto trace = forward_trace(psi, std::span<const Configuration>(&sigma, 1), true);
  const double one = 1.0;
  return backward_pass(psi.params, trace.steps, std::span<const double>(&one, 1));
}

RnnSampleBatch sample_rnn(const RnnWavefunction& psi, int n_samples, std::uint64_t seed) {
  if (n_samples < 0) throw std::invalid_argument("rnn: negative sample count");
  const int n = psi.n_sites();
  const int b = n_samples;
  RnnSampleBatch batch;
  batch.configurations.assign(b, Configuration(static_cast<std::size_t>(n)));
  batch.log_probs.assign(b, 0.0);
  if (b == 0) return batch;

  Rng rng(seed);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(psi.params.n_hidden, b);
  std::vector<int> x_cls(b, 2);
  StepTrace t;
  for (int step = 0; step < n; ++step) {
    cell_forward(psi.params, s, x_cls, false, t);
    const int site = psi.order[step];
    for (int i = 0; i < b; ++i) {
      const int occ = rng.uniform() < std::exp(t.log_p(1, i)) ? 1 : 0;
      batch.configurations[i].bits[site] = static_cast<std::uint8_t>(occ);
      batch.log_probs[i] += t.log_p(occ, i);
      x_cls[i] = occ;
    }
    s.swap(t.s);
  }
  return batch;
}

namespace {

// E_loc over a batch whose forward walk is already traced. Each flip k only
// perturbs the walk from step k+1 on, so the primed suffix restarts from the
// stored state s_k and consumes the original occupations afterwards.
std::vector<double> local_energy_from_trace(const RnnWavefunction& psi,
                                            const RydbergModel& model,
                                            std::span<const Configuration> sigmas,
                                            const std::vector<Coupling>& couplings,
                                            const ForwardTrace& trace) {
  const int n = psi.n_sites();
  const int b = trace.batch;

  std::vector<double> eloc(b);
  for (int i = 0; i < b; ++i) eloc[i] = diagonal_energy(sigmas[i], model, couplings);

  // suffix(t, i) = sum_{u >= t} log p_u(out_u).
  Eigen::MatrixXd suffix = Eigen::MatrixXd::Zero(n + 1, b);
  for (int t = n - 1; t >= 0; --t)
    for (int i = 0; i < b; ++i)
      suffix(t, i) = suffix(t + 1, i) + trace.steps[t].log_p(trace.steps[t].out[i], i);

  const double hop = -0.5 * model.omega;
  const Eigen::MatrixXd zero_state = Eigen::MatrixXd::Zero(psi.params.n_hidden, b);
  Eigen::RowVectorXd delta(b);
  std::vector<int> x_cls(b);
  StepTrace t;
  for (int k = 0; k < n; ++k) {
    const StepTrace& at_k = trace.steps[k];
    for (int i = 0; i < b; ++i)
      delta(i) = at_k.log_p(1 - at_k.out[i], i) - at_k.log_p(at_k.out[i], i);
    if (k + 1 < n) {
      // Primed walk over steps k+1 .. n-1; only the input at k+1 differs.
      const Eigen::MatrixXd* s = &(k == 0 ? zero_state : trace.steps[k - 1].s);
      for (int i = 0; i < b; ++i) x_cls[i] = k == 0 ? 2 : trace.steps[k - 1].out[i];
      cell_forward(psi.params, *s, x_cls, false, t);
      Eigen::MatrixXd s_run = std::move(t.s);
      for (int u = k + 1; u < n; ++u) {
        for (int i = 0; i < b; ++i)
          x_cls[i] = u == k + 1 ? 1 - trace.steps[k].out[i] : trace.steps[u - 1].out[i];
        cell_forward(psi.params, s_run, x_cls, false, t);
        for (int i = 0; i < b; ++i) delta(i) += t.log_p(trace.steps[u].out[i], i);
        s_run.swap(t.s);
      }
      for (int i = 0; i < b; ++i) delta(i) -= suffix(k + 1, i);
    }
    for (int i = 0; i < b; ++i) eloc[i] += hop * std::exp(0.5 * delta(i));
  }
  return eloc;
}

}  // namespace

std::vector<double> local_energy(const RnnWavefunction& psi, const RydbergModel& model,
                                 std::span<const Configuration> sigmas) {
  if (model.n_sites() != psi.n_sites())
    throw std::invalid_argument("rnn: model size does not match the visit order");
  const auto couplings = build_couplings(model);
  const auto trace = forward_trace(psi, sigmas, false);
  return local_energy_from_trace(psi, model, sigmas, couplings, trace);
}

std::vector<double> local_energy(const std::function<double(const Configuration&)>& log_amp,
                                 const RydbergModel& model,
                                 std::span<const Configuration> sigmas) {
  const auto couplings = build_couplings(model);
  std::vector<double> eloc;
  eloc.reserve(sigmas.size());
  for (const Configuration& sigma : sigmas) {
    double e = diagonal_energy(sigma, model, couplings);
    const double la = log_amp(sigma);
    for (int j = 0; j < model.n_sites(); ++j)
      e += -0.5 * model.omega * std::exp(log_amp(sigma.flipped(j)) - la);
    eloc.push_back(e);
  }
  return eloc;
}

EnergyGradient energy_and_gradient(const RnnWavefunction& psi, const RydbergModel& model,
                                   std::span<const Configuration> sigmas,
                                   GradientEstimator estimator) {
  if (model.n_sites() != psi.n_sites())
    throw std::invalid_argument("rnn: model size does not match the visit order");
  const int b = static_cast<int>(sigmas.size());
  if (b < 2) throw std::invalid_argument("rnn: gradient needs at least two samples");

  const auto couplings = build_couplings(model);
  const auto trace = forward_trace(psi, sigmas, true);
  const auto eloc = local_energy_from_trace(psi, model, sigmas, couplings, trace);

  EnergyGradient out;
  double mean = 0.0;
  for (double e : eloc) mean += e;
  mean /= b;
  double var = 0.0;
  for (double e : eloc) var += (e - mean) * (e - mean);
  var /= b - 1;
  out.energy = mean;
  out.local_energy_variance = var;
  out.energy_stderr = std::sqrt(var / b);

  const double baseline = estimator == GradientEstimator::kVarianceReduced ? mean : 0.0;
  std::vector<double> coeff(b);
  for (int i = 0; i < b; ++i) coeff[i] = 2.0 * (eloc[i] - baseline) / b;
  out.gradient = backward_pass(psi.params, trace.steps, coeff);
  return out;
}

EnergyGradient energy_and_gradient(const RnnWavefunction& psi, const RydbergModel& model,
                                   int n_samples, std::uint64_t seed,
                                   GradientEstimator estimator) {
  const auto batch = sample_rnn(psi, n_samples, seed);
  return energy_and_gradient(psi, model, batch.configurations, estimator);
}

std::vector<VmcEpochStats> train_vmc(RnnWavefunction& psi, const RydbergModel& model,
                                     const VmcOptions& options) {
  if (options.n_samples < 2) throw std::invalid_argument("rnn: need at least two samples");
  if (options.epochs < 0) throw std::invalid_argument("rnn: negative epoch count");

  std::vector<double> theta = psi.params.flatten_params();
  AdamState opt(theta.size(), options.learning_rate);
  std::vector<VmcEpochStats> history;
  history.reserve(options.epochs);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto batch =
        sample_rnn(psi, options.n_samples, derive_seed(options.seed, static_cast<std::uint64_t>(epoch)));
    const auto eg = energy_and_gradient(psi, model, batch.configurations, options.estimator);
    adam_update(opt, theta, eg.gradient);
    psi.params.unflatten_params(theta);
    history.push_back({epoch, eg.energy, eg.energy_stderr, eg.local_energy_variance});
  }
  return history;
}

StateVector rnn_statevector(const RnnWavefunction& psi) {
  const int n = psi.n_sites();
  if (n > 16) throw std::invalid_argument("rnn: statevector limited to 16 sites");
  const std::uint64_t dim = std::uint64_t{1} << n;
  StateVector state;
  state.n_sites = n;
  state.amplitudes.resize(static_cast<Eigen::Index>(dim));
  const std::uint64_t chunk = 8192;
  std::vector<Configuration> block;
  for (std::uint64_t base = 0; base < dim; base += chunk) {
    const std::uint64_t count = std::min(chunk, dim - base);
    block.clear();
    for (std::uint64_t u = 0; u < count; ++u)
      block.push_back(Configuration::from_index(base + u, n));
    const auto lp = log_psi_batch(psi, block);
    for (std::uint64_t u = 0; u < count; ++u)
      state.amplitudes(static_cast<Eigen::Index>(base + u)) = std::exp(lp[u]);
  }
  return state;
}

void save_rnn(const std::string& path, const RnnWavefunction& psi) {
  const GruParams& p = psi.params;
  auto matrix = [](const std::string& name, const Eigen::MatrixXd& m) {
    return NamedArray{name, {m.rows(), m.cols()},
                      std::vector<double>(m.data(), m.data() + m.size())};
  };
  auto vector = [](const std::string& name, const Eigen::VectorXd& v) {
    return NamedArray{name, {v.size()},
                      std::vector<double>(v.data(), v.data() + v.size())};
  };
  std::vector<NamedArray> arrays;
  arrays.push_back({"shape", {2}, {static_cast<double>(p.n_hidden),
                                   static_cast<double>(psi.n_sites())}});
  std::vector<double> order(psi.order.begin(), psi.order.end());
  arrays.push_back({"order", {static_cast<std::int64_t>(order.size())}, order});
  arrays.push_back(matrix("w_update", p.w_update));
  arrays.push_back(matrix("w_reset", p.w_reset));
  arrays.push_back(matrix("w_candidate", p.w_candidate));
  arrays.push_back(vector("b_update", p.b_update));
  arrays.push_back(vector("b_reset", p.b_reset));
  arrays.push_back(vector("b_candidate", p.b_candidate));
  arrays.push_back(matrix("u_out", p.u_out));
  arrays.push_back(vector("c_out", p.c_out));
  save_checkpoint(path, arrays);
  write_key_values(path + ".meta", {{"n_hidden", std::to_string(p.n_hidden)},
                                    {"n_sites", std::to_string(psi.n_sites())}});
}

RnnWavefunction load_rnn(const std::string& path) {
  const auto arrays = load_checkpoint(path);
  const auto& shape = find_array(arrays, "shape");
  if (shape.values.size() != 2) throw std::runtime_error("rnn checkpoint: bad shape record");
  const int n_hidden = static_cast<int>(shape.values[0]);
  const int n_sites = static_cast<int>(shape.values[1]);

  auto matrix = [&arrays](const std::string& name, int rows, int cols) {
    const auto& a = find_array(arrays, name);
    if (a.dims.size() != 2 || a.dims[0] != rows || a.dims[1] != cols)
      throw std::runtime_error("rnn checkpoint: bad dims for " + name);
    return Eigen::Map<const Eigen::MatrixXd>(a.values.data(), rows, cols).eval();
  };
  auto vector = [&arrays](const std::string& name, int size) {
    const auto& a = find_array(arrays, name);
    if (a.n_values() != static_cast<std::size_t>(size))
      throw std::runtime_error("rnn checkpoint: bad dims for " + name);
    return Eigen::Map<const Eigen::VectorXd>(a.values.data(), size).eval();
  };

  RnnWavefunction psi;
  const auto& order = find_array(arrays, "order");
  if (order.n_values() != static_cast<std::size_t>(n_sites))
    throw std::runtime_error("rnn checkpoint: bad visit order");
  psi.order.reserve(n_sites);
  for (double v : order.values) psi.order.push_back(static_cast<int>(v));

  GruParams& p = psi.params;
  p.n_hidden = n_hidden;
  const int wc = n_hidden + GruParams::kInputDim;
  p.w_update = matrix("w_update", n_hidden, wc);
  p.w_reset = matrix("w_reset", n_hidden, wc);
  p.w_candidate = matrix("w_candidate", n_hidden, wc);
  p.b_update = vector("b_update", n_hidden);
  p.b_reset = vector("b_reset", n_hidden);
  p.b_candidate = vector("b_candidate", n_hidden);
  p.u_out = matrix("u_out", 2, n_hidden);
  p.c_out = vector("c_out", 2);
  return psi;
}

}  // namespace nqs
