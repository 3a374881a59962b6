#include "nqs/cnn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

#include "nqs/io.hpp"
#include "nqs/optim.hpp"
#include "nqs/rng.hpp"

namespace nqs {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

constexpr double kProbClamp = 1e-12;

// out[o][y][x] += sum_{i,m,n} K[o][i][m][n] in[i][y+m][x+n], one sample.
void conv_sample(const double* in, int h, int w, const ConvLayerParams& L, double* out) {
  const int oh = h - L.kernel_y + 1;
  const int ow = w - L.kernel_x + 1;
  for (int o = 0; o < L.out_channels; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int i = 0; i < L.in_channels; ++i) {
          const double* plane = in + (std::size_t)i * h * w;
          const double* k = L.kernel.data() +
                            ((std::size_t)o * L.in_channels + i) * L.kernel_y * L.kernel_x;
          for (int m = 0; m < L.kernel_y; ++m)
            for (int n = 0; n < L.kernel_x; ++n)
              acc += k[m * L.kernel_x + n] * plane[(y + m) * w + x + n];
        }
        out[((std::size_t)o * oh + y) * ow + x] = acc;
      }
    }
  }
}

// Gradients of one sample's conv: accumulates dK and (optionally) d(input).
void conv_sample_backward(const double* in, int h, int w, const ConvLayerParams& L,
                          const double* dout, double* dkernel, double* din) {
  const int oh = h - L.kernel_y + 1;
  const int ow = w - L.kernel_x + 1;
  for (int o = 0; o < L.out_channels; ++o) {
    const double* dplane = dout + (std::size_t)o * oh * ow;
    for (int i = 0; i < L.in_channels; ++i) {
      const double* plane = in + (std::size_t)i * h * w;
      const std::size_t kbase = ((std::size_t)o * L.in_channels + i) * L.kernel_y * L.kernel_x;
      for (int m = 0; m < L.kernel_y; ++m) {
        for (int n = 0; n < L.kernel_x; ++n) {
          double acc = 0.0;
          for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
              acc += dplane[y * ow + x] * plane[(y + m) * w + x + n];
          dkernel[kbase + m * L.kernel_x + n] += acc;
        }
      }
      if (din != nullptr) {
        double* dp = din + (std::size_t)i * h * w;
        const double* k = L.kernel.data() + kbase;
        for (int y = 0; y < oh; ++y)
          for (int x = 0; x < ow; ++x) {
            const double g = dplane[y * ow + x];
            for (int m = 0; m < L.kernel_y; ++m)
              for (int n = 0; n < L.kernel_x; ++n)
                dp[(y + m) * w + x + n] += g * k[m * L.kernel_x + n];
          }
      }
    }
  }
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// Every activation buffer is per-sample channel-major, batch-contiguous.
struct ForwardCache {
  std::vector<double> a1, z1;  // conv1 pre/post ReLU
  std::vector<double> a2, z2;  // conv2 pre/post ReLU (two-conv models)
  std::vector<double> a3, z3;  // dense1 pre/post ReLU
  std::vector<double> probs;   // softmax rows [batch][2]
};

void forward_batch(const CnnModel& model, const CnnBatch& batch, ForwardCache& c) {
  const int b = batch.batch;
  const int h1 = model.conv1_h(), w1 = model.conv1_w();
  const std::size_t map1 = (std::size_t)model.conv1.out_channels * h1 * w1;

  c.a1.assign((std::size_t)b * map1, 0.0);
  for (int s = 0; s < b; ++s)
    conv_sample(batch.images.data() + (std::size_t)s * model.ly * model.lx, model.ly, model.lx,
                model.conv1, c.a1.data() + (std::size_t)s * map1);
  c.z1 = c.a1;
  relu_inplace(c.z1);

  const std::vector<double>* features = &c.z1;
  if (model.has_conv2) {
    const int h2 = model.conv2_h(), w2 = model.conv2_w();
    const std::size_t map2 = (std::size_t)model.conv2.out_channels * h2 * w2;
    c.a2.assign((std::size_t)b * map2, 0.0);
    for (int s = 0; s < b; ++s)
      conv_sample(c.z1.data() + (std::size_t)s * map1, h1, w1, model.conv2,
                  c.a2.data() + (std::size_t)s * map2);
    c.z2 = c.a2;
    relu_inplace(c.z2);
    features = &c.z2;
  }

  const int flat = model.flat_dim();
  ConstMatMap F(features->data(), b, flat);
  ConstMatMap W1(model.dense1.kernel.data(), model.dense1.out_dim, flat);
  ConstVecMap b1(model.dense1.bias.data(), model.dense1.out_dim);
  c.a3.resize((std::size_t)b * model.dense1.out_dim);
  MatMap A3(c.a3.data(), b, model.dense1.out_dim);
  A3.noalias() = F * W1.transpose();
  A3.rowwise() += b1.transpose();
  c.z3 = c.a3;
  relu_inplace(c.z3);

  ConstMatMap Z3(c.z3.data(), b, model.dense2.in_dim);
  ConstMatMap W2(model.dense2.kernel.data(), model.dense2.out_dim, model.dense2.in_dim);
  ConstVecMap b2(model.dense2.bias.data(), model.dense2.out_dim);
  c.probs.resize((std::size_t)b * model.dense2.out_dim);
  MatMap P(c.probs.data(), b, model.dense2.out_dim);
  P.noalias() = Z3 * W2.transpose();
  P.rowwise() += b2.transpose();
  for (int s = 0; s < b; ++s)
    softmax(std::span<double>(c.probs.data() + (std::size_t)s * model.dense2.out_dim,
                              model.dense2.out_dim));
}

void check_model_batch(const CnnModel& model, const CnnBatch& batch) {
  if (batch.images.size() != (std::size_t)batch.batch * model.ly * model.lx ||
      batch.labels.size() != (std::size_t)batch.batch)
    throw std::invalid_argument("cnn: batch does not match model geometry");
}

}  // namespace

int CnnModel::flat_dim() const {
  if (has_conv2) return conv2.out_channels * conv2_h() * conv2_w();
  return conv1.out_channels * conv1_h() * conv1_w();
}

std::size_t CnnModel::n_params() const {
  return conv1.size() + conv2.size() + dense1.size() + dense2.size();
}

std::vector<double> CnnModel::flatten_params() const {
  std::vector<double> theta;
  theta.reserve(n_params());
  for (const auto* block :
       {&conv1.kernel, &conv2.kernel, &dense1.kernel, &dense1.bias, &dense2.kernel, &dense2.bias})
    theta.insert(theta.end(), block->begin(), block->end());
  return theta;
}

void CnnModel::unflatten_params(std::span<const double> theta) {
  if (theta.size() != n_params())
    throw std::invalid_argument("cnn: parameter vector length mismatch");
  const double* p = theta.data();
  for (auto* block :
       {&conv1.kernel, &conv2.kernel, &dense1.kernel, &dense1.bias, &dense2.kernel, &dense2.bias}) {
    std::copy(p, p + block->size(), block->begin());
    p += block->size();
  }
}

std::vector<double> CnnGradients::flatten() const {
  std::vector<double> g;
  for (const auto* block :
       {&conv1_kernel, &conv2_kernel, &dense1_kernel, &dense1_bias, &dense2_kernel, &dense2_bias})
    g.insert(g.end(), block->begin(), block->end());
  return g;
}

CnnModel make_cnn(const CnnConfig& config, std::uint64_t seed) {
  if (config.lx < config.kernel_size || config.ly < config.kernel_size)
    throw std::invalid_argument("cnn: lattice smaller than the convolution kernel");
  if (config.conv_channels <= 0 || config.dense_units <= 0)
    throw std::invalid_argument("cnn: layer widths must be positive");

  CnnModel m;
  m.lx = config.lx;
  m.ly = config.ly;
  m.has_conv2 = config.lx >= 7 && config.ly >= 7;

  auto init_conv = [&](ConvLayerParams& L, int out, int in, int layer_idx) {
    L.out_channels = out;
    L.in_channels = in;
    L.kernel_y = config.kernel_size;
    L.kernel_x = config.kernel_size;
    L.kernel.resize((std::size_t)out * in * config.kernel_size * config.kernel_size);
    const double fan = (double)(in + out) * config.kernel_size * config.kernel_size;
    const double limit = std::sqrt(6.0 / fan);
    Rng rng(derive_seed(seed, (std::uint64_t)layer_idx));
    for (double& k : L.kernel) k = limit * (2.0 * rng.uniform() - 1.0);
  };
  auto init_dense = [&](DenseLayerParams& L, int out, int in, int layer_idx) {
    L.out_dim = out;
    L.in_dim = in;
    L.kernel.resize((std::size_t)out * in);
    L.bias.assign(out, 0.0);
    const double limit = std::sqrt(6.0 / (double)(in + out));
    Rng rng(derive_seed(seed, (std::uint64_t)layer_idx));
    for (double& k : L.kernel) k = limit * (2.0 * rng.uniform() - 1.0);
  };

  init_conv(m.conv1, config.conv_channels, 1, 0);
  if (m.has_conv2) init_conv(m.conv2, config.conv_channels, config.conv_channels, 1);
  init_dense(m.dense1, config.dense_units, m.flat_dim(), 2);
  init_dense(m.dense2, 2, config.dense_units, 3);
  return m;
}

std::vector<double> conv2d_forward(std::span<const double> input, int h, int w,
                                   const ConvLayerParams& layer) {
  if (h < layer.kernel_y || w < layer.kernel_x)
    throw std::invalid_argument("conv2d_forward: input smaller than the kernel");
  if (input.size() != (std::size_t)layer.in_channels * h * w)
    throw std::invalid_argument("conv2d_forward: input length mismatch");
  const int oh = h - layer.kernel_y + 1;
  const int ow = w - layer.kernel_x + 1;
  std::vector<double> out((std::size_t)layer.out_channels * oh * ow, 0.0);
  conv_sample(input.data(), h, w, layer, out.data());
  return out;
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

void softmax(std::span<double> logits) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : logits) top = std::max(top, v);
  double norm = 0.0;
  for (double& v : logits) {
    v = std::exp(v - top);
    norm += v;
  }
  for (double& v : logits) v /= norm;
}

CnnBatch make_batch(const LabeledDataset& data, std::span<const std::size_t> indices) {
  CnnBatch b;
  b.batch = (int)indices.size();
  const std::size_t n_sites = (std::size_t)data.lx * data.ly;
  b.images.reserve(indices.size() * n_sites);
  b.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    const LabeledRecord& r = data.records.at(idx);
    if (r.sigma.bits.size() != n_sites)
      throw std::invalid_argument("cnn: record size does not match dataset geometry");
    for (std::uint8_t bit : r.sigma.bits) b.images.push_back((double)bit);
    b.labels.push_back(r.label);
  }
  return b;
}

std::vector<double> cnn_forward_batch(const CnnModel& model, const CnnBatch& batch) {
  check_model_batch(model, batch);
  ForwardCache c;
  forward_batch(model, batch, c);
  return std::move(c.probs);
}

std::vector<double> cnn_forward(const CnnModel& model, const Configuration& sigma) {
  CnnBatch b;
  b.batch = 1;
  b.images.assign(sigma.bits.begin(), sigma.bits.end());
  b.labels = {0};
  return cnn_forward_batch(model, b);
}

double cross_entropy(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != 2 * labels.size())
    throw std::invalid_argument("cross_entropy: probs/labels size mismatch");
  if (labels.empty()) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p1 = std::clamp(probs[2 * i + 1], kProbClamp, 1.0 - kProbClamp);
    loss -= labels[i] == 1 ? std::log(p1) : std::log(1.0 - p1);
  }
  return loss / (double)labels.size();
}

double accuracy(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != 2 * labels.size())
    throw std::invalid_argument("accuracy: probs/labels size mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pred = probs[2 * i + 1] > probs[2 * i] ? 1 : 0;
    hits += pred == labels[i];
  }
  return (double)hits / (double)labels.size();
}

double cnn_backward(const CnnModel& model, const CnnBatch& batch, CnnGradients& grads) {
  check_model_batch(model, batch);
  const int b = batch.batch;
  if (b == 0) throw std::invalid_argument("cnn_backward: empty batch");

  ForwardCache c;
  forward_batch(model, batch, c);

  grads.conv1_kernel.assign(model.conv1.kernel.size(), 0.0);
  grads.conv2_kernel.assign(model.conv2.kernel.size(), 0.0);
  grads.dense1_kernel.assign(model.dense1.kernel.size(), 0.0);
  grads.dense1_bias.assign(model.dense1.bias.size(), 0.0);
  grads.dense2_kernel.assign(model.dense2.kernel.size(), 0.0);
  grads.dense2_bias.assign(model.dense2.bias.size(), 0.0);

  // Softmax + cross-entropy collapse to (P - onehot(y)) / batch.
  std::vector<double> dlogits = c.probs;
  for (int s = 0; s < b; ++s) dlogits[2 * s + batch.labels[s]] -= 1.0;
  for (double& g : dlogits) g /= (double)b;

  const int flat = model.flat_dim();
  const int u = model.dense1.out_dim;
  ConstMatMap dL(dlogits.data(), b, 2);
  ConstMatMap Z3(c.z3.data(), b, u);
  ConstMatMap W2(model.dense2.kernel.data(), 2, u);
  MatMap gW2(grads.dense2_kernel.data(), 2, u);
  gW2.noalias() = dL.transpose() * Z3;
  Eigen::Map<Eigen::RowVectorXd>(grads.dense2_bias.data(), 2) = dL.colwise().sum();

  std::vector<double> da3((std::size_t)b * u);
  MatMap dA3(da3.data(), b, u);
  dA3.noalias() = dL * W2;
  for (std::size_t i = 0; i < da3.size(); ++i)
    if (c.a3[i] <= 0.0) da3[i] = 0.0;

  const std::vector<double>& features = model.has_conv2 ? c.z2 : c.z1;
  ConstMatMap F(features.data(), b, flat);
  MatMap gW1(grads.dense1_kernel.data(), u, flat);
  gW1.noalias() = dA3.transpose() * F;
  Eigen::Map<Eigen::RowVectorXd>(grads.dense1_bias.data(), u) = dA3.colwise().sum();

  std::vector<double> dfeat((std::size_t)b * flat);
  MatMap dF(dfeat.data(), b, flat);
  ConstMatMap W1(model.dense1.kernel.data(), u, flat);
  dF.noalias() = dA3 * W1;

  const int h1 = model.conv1_h(), w1 = model.conv1_w();
  const std::size_t map1 = (std::size_t)model.conv1.out_channels * h1 * w1;
  std::vector<double> dz1;
  if (model.has_conv2) {
    for (std::size_t i = 0; i < dfeat.size(); ++i)
      if (c.a2[i] <= 0.0) dfeat[i] = 0.0;
    dz1.assign(c.z1.size(), 0.0);
    const int h2 = model.conv2_h(), w2 = model.conv2_w();
    const std::size_t map2 = (std::size_t)model.conv2.out_channels * h2 * w2;
    for (int s = 0; s < b; ++s)
      conv_sample_backward(c.z1.data() + (std::size_t)s * map1, h1, w1, model.conv2,
                           dfeat.data() + (std::size_t)s * map2, grads.conv2_kernel.data(),
                           dz1.data() + (std::size_t)s * map1);
  } else {
    dz1 = std::move(dfeat);
  }

  for (std::size_t i = 0; i < dz1.size(); ++i)
    if (c.a1[i] <= 0.0) dz1[i] = 0.0;
  const std::size_t n_pix = (std::size_t)model.ly * model.lx;
  for (int s = 0; s < b; ++s)
    conv_sample_backward(batch.images.data() + s * n_pix, model.ly, model.lx, model.conv1,
                         dz1.data() + (std::size_t)s * map1, grads.conv1_kernel.data(), nullptr);

  return cross_entropy(c.probs, batch.labels);
}

std::pair<double, double> cnn_evaluate(const CnnModel& model, const LabeledDataset& data) {
  if (data.records.empty()) return {0.0, 0.0};
  constexpr std::size_t kChunk = 512;
  double loss = 0.0, acc = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t stop = std::min(start + kChunk, data.size());
    idx.resize(stop - start);
    for (std::size_t i = start; i < stop; ++i) idx[i - start] = i;
    const CnnBatch batch = make_batch(data, idx);
    const std::vector<double> probs = cnn_forward_batch(model, batch);
    loss += cross_entropy(probs, batch.labels) * (double)idx.size();
    acc += accuracy(probs, batch.labels) * (double)idx.size();
  }
  return {loss / (double)data.size(), acc / (double)data.size()};
}

std::vector<CnnEpochStats> cnn_train(CnnModel& model, const LabeledDataset& train,
                                     const LabeledDataset& test, const CnnTrainConfig& config) {
  if (train.records.empty()) throw std::invalid_argument("cnn_train: empty training set");
  if (config.epochs <= 0 || config.batch_size <= 0)
    throw std::invalid_argument("cnn_train: epochs and batch size must be positive");

  std::vector<double> theta = model.flatten_params();
  AdamState adam(theta.size(), config.learning_rate);
  BatchIterator batches(train.size(), (std::size_t)config.batch_size, config.seed);
  CnnGradients grads;

  std::vector<CnnEpochStats> history;
  history.reserve(config.epochs);
  std::vector<std::size_t> idx;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    batches.start_epoch(epoch);
    while (batches.next(idx)) {
      const CnnBatch batch = make_batch(train, idx);
      cnn_backward(model, batch, grads);
      adam_update(adam, theta, grads.flatten());
      model.unflatten_params(theta);
    }
    CnnEpochStats s;
    s.epoch = epoch;
    std::tie(s.train_loss, s.train_accuracy) = cnn_evaluate(model, train);
    std::tie(s.test_loss, s.test_accuracy) = cnn_evaluate(model, test);
    history.push_back(s);
  }
  return history;
}

SignalCurve output_signal_curve(const CnnModel& model, const LabeledDataset& data) {
  std::map<double, std::vector<std::size_t>> by_delta;
  for (std::size_t i = 0; i < data.size(); ++i)
    by_delta[data.records[i].delta].push_back(i);

  SignalCurve curve;
  for (const auto& [delta, idx] : by_delta) {
    const CnnBatch batch = make_batch(data, idx);
    const std::vector<double> probs = cnn_forward_batch(model, batch);
    double f0 = 0.0, f1 = 0.0;
    for (std::size_t s = 0; s < idx.size(); ++s) {
      f0 += probs[2 * s];
      f1 += probs[2 * s + 1];
    }
    curve.delta.push_back(delta);
    curve.f0.push_back(f0 / (double)idx.size());
    curve.f1.push_back(f1 / (double)idx.size());
  }
  return curve;
}

double critical_point_estimate(const SignalCurve& curve) {
  const std::size_t n = curve.delta.size();
  if (n < 2 || curve.f0.size() != n || curve.f1.size() != n)
    throw std::invalid_argument("critical_point_estimate: need at least two curve points");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double g0 = curve.f1[i] - curve.f0[i];
    const double g1 = curve.f1[i + 1] - curve.f0[i + 1];
    if (g0 <= 0.0 && g1 >= 0.0 && (g0 < 0.0 || g1 > 0.0))
      return curve.delta[i] + (curve.delta[i + 1] - curve.delta[i]) * (-g0) / (g1 - g0);
  }
  throw std::runtime_error("critical_point_estimate: signal curves do not cross");
}

void save_cnn(const std::string& path, const CnnModel& model) {
  std::vector<NamedArray> arrays;
  arrays.push_back({"shape",
                    {6},
                    {(double)model.lx, (double)model.ly, model.has_conv2 ? 1.0 : 0.0,
                     (double)model.conv1.out_channels, (double)model.conv1.kernel_y,
                     (double)model.dense1.out_dim}});
  arrays.push_back({"conv1.kernel",
                    {model.conv1.out_channels, model.conv1.in_channels, model.conv1.kernel_y,
                     model.conv1.kernel_x},
                    model.conv1.kernel});
  if (model.has_conv2)
    arrays.push_back({"conv2.kernel",
                      {model.conv2.out_channels, model.conv2.in_channels, model.conv2.kernel_y,
                       model.conv2.kernel_x},
                      model.conv2.kernel});
  arrays.push_back(
      {"dense1.kernel", {model.dense1.out_dim, model.dense1.in_dim}, model.dense1.kernel});
  arrays.push_back({"dense1.bias", {model.dense1.out_dim}, model.dense1.bias});
  arrays.push_back(
      {"dense2.kernel", {model.dense2.out_dim, model.dense2.in_dim}, model.dense2.kernel});
  arrays.push_back({"dense2.bias", {model.dense2.out_dim}, model.dense2.bias});
  save_checkpoint(path, arrays);
}

CnnModel load_cnn(const std::string& path) {
  const std::vector<NamedArray> arrays = load_checkpoint(path);
  const NamedArray& shape = find_array(arrays, "shape");
  if (shape.values.size() != 6) throw std::runtime_error("cnn checkpoint: bad shape record");

  CnnConfig config;
  config.lx = (int)shape.values[0];
  config.ly = (int)shape.values[1];
  config.conv_channels = (int)shape.values[3];
  config.kernel_size = (int)shape.values[4];
  config.dense_units = (int)shape.values[5];
  CnnModel m = make_cnn(config, 0);
  if (m.has_conv2 != (shape.values[2] != 0.0))
    throw std::runtime_error("cnn checkpoint: architecture does not match geometry");

  auto fill = [&](const std::string& name, std::vector<double>& dst) {
    const NamedArray& a = find_array(arrays, name);
    if (a.values.size() != dst.size())
      throw std::runtime_error("cnn checkpoint: array size mismatch for " + name);
    dst = a.values;
  };
  fill("conv1.kernel", m.conv1.kernel);
  if (m.has_conv2) fill("conv2.kernel", m.conv2.kernel);
  fill("dense1.kernel", m.dense1.kernel);
  fill("dense1.bias", m.dense1.bias);
  fill("dense2.kernel", m.dense2.kernel);
  fill("dense2.bias", m.dense2.bias);
  return m;
}

}  // namespace nqs
