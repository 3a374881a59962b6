#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nqs/data.hpp"

namespace nqs {

// Convolution kernel [out_channels][in_channels][ky][kx], row-major, no bias.
struct ConvLayerParams {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_y = 0;
  int kernel_x = 0;
  std::vector<double> kernel;

  std::size_t size() const { return kernel.size(); }
};

// Fully connected layer: kernel [out_dim][in_dim] row-major plus bias.
struct DenseLayerParams {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<double> kernel;
  std::vector<double> bias;

  std::size_t size() const { return kernel.size() + bias.size(); }
};

struct CnnConfig {
  int lx = 4;
  int ly = 4;
  int conv_channels = 32;
  int kernel_size = 3;
  int dense_units = 64;
};

// Phase classifier over single-channel 0/1 occupation images:
// conv(3x3) -> ReLU [-> conv(3x3) -> ReLU] -> flatten -> dense -> ReLU
// -> dense(2) -> softmax. The second conv stage is used only on lattices of
// at least 7x7, so its input feature map is at least 5x5; smaller lattices
// run the single-conv variant.
struct CnnModel {
  int lx = 0;
  int ly = 0;
  bool has_conv2 = false;
  ConvLayerParams conv1;
  ConvLayerParams conv2;
  DenseLayerParams dense1;
  DenseLayerParams dense2;

  int conv1_h() const { return ly - conv1.kernel_y + 1; }
  int conv1_w() const { return lx - conv1.kernel_x + 1; }
  int conv2_h() const { return conv1_h() - conv2.kernel_y + 1; }
  int conv2_w() const { return conv1_w() - conv2.kernel_x + 1; }
  // Length of the flattened feature vector entering dense1.
  int flat_dim() const;

  std::size_t n_params() const;
  std::vector<double> flatten_params() const;
  void unflatten_params(std::span<const double> theta);
};

// Gradient buffers mirroring the trainable parameters of a CnnModel.
struct CnnGradients {
  std::vector<double> conv1_kernel;
  std::vector<double> conv2_kernel;
  std::vector<double> dense1_kernel;
  std::vector<double> dense1_bias;
  std::vector<double> dense2_kernel;
  std::vector<double> dense2_bias;

  std::vector<double> flatten() const;
};

// Glorot-uniform kernels (limit sqrt(6/(fan_in+fan_out))), zero biases.
CnnModel make_cnn(const CnnConfig& config, std::uint64_t seed);

// Valid (no padding) cross-correlation, stride 1. input is channel-major
// [in_channels][h][w]; output is [out_channels][h-ky+1][w-kx+1].
std::vector<double> conv2d_forward(std::span<const double> input, int h, int w,
                                   const ConvLayerParams& layer);

double relu(double x);
// In-place numerically stable softmax (max subtraction).
void softmax(std::span<double> logits);

// Class distribution [P(y=0), P(y=1)] for one occupation snapshot.
std::vector<double> cnn_forward(const CnnModel& model, const Configuration& sigma);

// Batch of snapshots as a row-major [batch][ly*lx] image block.
struct CnnBatch {
  int batch = 0;
  std::vector<double> images;
  std::vector<int> labels;
};

CnnBatch make_batch(const LabeledDataset& data, std::span<const std::size_t> indices);

// Class probabilities for a whole batch, row-major [batch][2].
std::vector<double> cnn_forward_batch(const CnnModel& model, const CnnBatch& batch);

// Mean binary cross-entropy over the batch; probabilities are clamped to
// [1e-12, 1-1e-12] before the logs.
double cross_entropy(std::span<const double> probs, std::span<const int> labels);

// Fraction of rows whose argmax matches the label.
double accuracy(std::span<const double> probs, std::span<const int> labels);

// Reverse-mode gradients of the mean cross-entropy over the batch. Returns
// the batch loss; fills `grads` (resized to match the model).
double cnn_backward(const CnnModel& model, const CnnBatch& batch, CnnGradients& grads);

struct CnnTrainConfig {
  int epochs = 5;
  int batch_size = 32;
  double learning_rate = 1e-3;  // Adam
  std::uint64_t seed = 1;
};

struct CnnEpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

// Loss and accuracy of the model on a dataset.
std::pair<double, double> cnn_evaluate(const CnnModel& model, const LabeledDataset& data);

// Minibatch Adam on the mean cross-entropy; per-epoch loss/accuracy on both
// splits. Shuffling and init are deterministic in the seeds.
std::vector<CnnEpochStats> cnn_train(CnnModel& model, const LabeledDataset& train,
                                     const LabeledDataset& test, const CnnTrainConfig& config);

// Mean class probabilities per detuning: f(y, delta) for y = 0, 1.
struct SignalCurve {
  std::vector<double> delta;
  std::vector<double> f0;
  std::vector<double> f1;
};

SignalCurve output_signal_curve(const CnnModel& model, const LabeledDataset& data);

// Detuning where the two mean-signal curves cross, linearly interpolated
// between the first bracketing grid points (f1-f0 goes from <0 to >=0).
// Throws if no sign change exists.
double critical_point_estimate(const SignalCurve& curve);

void save_cnn(const std::string& path, const CnnModel& model);
CnnModel load_cnn(const std::string& path);

}  // namespace nqs
