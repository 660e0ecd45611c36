#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "harvest_guard/rng.hpp"
#include "harvest_guard/slip_data.hpp"

namespace harvest_guard::slip {

/// Stacked-LSTM classifier shape. Defaults are the deployed architecture:
/// 7 inputs, 5 layers of 64 units, dropout 0.2 between layers, dropout 0.3
/// before a 64->3 linear head and softmax.
struct SlipArchitecture {
  std::size_t layers = 5;
  std::size_t hidden = 64;
  std::size_t input = kFeatureCount;
  std::size_t classes = kClassCount;
  double dropout_between = 0.2;
  double dropout_head = 0.3;

  void validate() const;
  bool operator==(const SlipArchitecture&) const = default;
};

/// One layer; gate blocks are stacked [input, forget, cell, output] along rows.
struct LstmLayerParams {
  Eigen::MatrixXd w_input;   // 4H x in
  Eigen::MatrixXd w_hidden;  // 4H x H
  Eigen::VectorXd bias;      // 4H
};

/// Every trainable tensor. Also used for gradients and optimizer state.
struct SlipParams {
  std::vector<LstmLayerParams> layers;
  Eigen::MatrixXd head_w;  // C x H
  Eigen::VectorXd head_b;  // C

  static SlipParams zeros(const SlipArchitecture& arch);

  struct Block {
    std::string name;
    double* data;
    std::size_t rows;
    std::size_t cols;
    std::size_t size() const { return rows * cols; }
  };
  /// Views over every tensor in a fixed order (layer 0 first, head last).
  std::vector<Block> blocks();
  std::size_t parameter_count() const;
};

struct TrainingHyperparameters {
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  double momentum = 0.9;
  double clip_norm = 5.0;  // global L2 norm; <= 0 disables clipping
  std::uint64_t seed = 0;

  void validate() const;
};

struct SlipModel {
  SlipArchitecture arch;
  SlipParams params;
  std::vector<std::string> feature_order{kFeatureOrder.begin(), kFeatureOrder.end()};
  // Inputs are standardised as (x - mean) / scale before the first layer.
  std::array<double, kFeatureCount> input_mean{};
  std::array<double, kFeatureCount> input_scale{1, 1, 1, 1, 1, 1, 1};
  std::optional<TrainingHyperparameters> training;
  std::vector<double> loss_history;

  /// Uniform(+-1/sqrt(hidden)) weights and biases, forget-gate bias 1.
  static SlipModel initialize(const SlipArchitecture& arch, std::uint64_t seed);
  static SlipModel zeros(const SlipArchitecture& arch);

  /// Shapes agree with `arch` and the feature order is canonical.
  void validate() const;
};

struct SlipProbabilities {
  double p_normal = 1.0 / 3.0;
  double p_slipping = 1.0 / 3.0;
  double p_slipped = 1.0 / 3.0;

  double operator[](std::size_t i) const { return i == 0 ? p_normal : i == 1 ? p_slipping : p_slipped; }
};

enum class ForwardMode { Infer, Train };

/// Single-window forward pass. Train mode applies dropout drawn from `rng`,
/// which must then be non-null.
SlipProbabilities lstm_forward(const SlipModel& model, const SlipWindow& window,
                               ForwardMode mode = ForwardMode::Infer, Rng* rng = nullptr);

/// Batched inference; identical numbers to calling lstm_forward per window.
std::vector<SlipProbabilities> lstm_predict(const SlipModel& model, std::span<const SlipWindow> windows);

/// Mean cross-entropy of a batch and its gradient with respect to every
/// parameter. With `dropout_rng` null, dropout is off; otherwise masks are
/// drawn from it in a fixed order, so reseeding reproduces them exactly.
double loss_and_gradient(const SlipModel& model, std::span<const SlipWindow> batch, SlipParams* grad,
                         Rng* dropout_rng = nullptr);

/// Called after each epoch with the mean training loss and, when a
/// validation set was given, its loss (NaN otherwise).
using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Cross-entropy, minibatch gradient descent with momentum, BPTT through
/// the five timesteps. Deterministic for a fixed seed and data order.
SlipModel lstm_train(std::span<const SlipWindow> train, std::span<const SlipWindow> validation,
                     const TrainingHyperparameters& hp, const SlipArchitecture& arch = {},
                     const EpochCallback& on_epoch = {});

void save_model(const SlipModel& model, const std::filesystem::path& path);
SlipModel load_model(const std::filesystem::path& path);
std::string serialize_model(const SlipModel& model);
SlipModel deserialize_model(const std::string& text);

}  // namespace harvest_guard::slip
