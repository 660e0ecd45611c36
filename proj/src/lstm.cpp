#include "harvest_guard/lstm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "harvest_guard/errors.hpp"

namespace harvest_guard::slip {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void SlipArchitecture::validate() const {
  if (layers == 0 || hidden == 0 || input == 0 || classes < 2)
    throw ValidationError("architecture needs layers, hidden, input > 0 and classes >= 2");
  if (!(dropout_between >= 0.0 && dropout_between < 1.0) || !(dropout_head >= 0.0 && dropout_head < 1.0))
    throw ValidationError("dropout rates must be in [0, 1)");
}

void TrainingHyperparameters::validate() const {
  if (epochs == 0) throw ValidationError("epochs must be > 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError(fmt::format("learning rate must be > 0, got {}", learning_rate));
  if (batch_size == 0) throw ValidationError("batch size must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
}

SlipParams SlipParams::zeros(const SlipArchitecture& arch) {
  SlipParams p;
  const auto gates = static_cast<Eigen::Index>(4 * arch.hidden);
  const auto h = static_cast<Eigen::Index>(arch.hidden);
  for (std::size_t l = 0; l < arch.layers; ++l) {
    const auto in = static_cast<Eigen::Index>(l == 0 ? arch.input : arch.hidden);
    p.layers.push_back({MatrixXd::Zero(gates, in), MatrixXd::Zero(gates, h), VectorXd::Zero(gates)});
  }
  p.head_w = MatrixXd::Zero(static_cast<Eigen::Index>(arch.classes), h);
  p.head_b = VectorXd::Zero(static_cast<Eigen::Index>(arch.classes));
  return p;
}

std::vector<SlipParams::Block> SlipParams::blocks() {
  std::vector<Block> out;
  const auto add = [&](std::string name, auto& m) {
    out.push_back({std::move(name), m.data(), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    add(fmt::format("lstm.{}.w_input", l), layers[l].w_input);
    add(fmt::format("lstm.{}.w_hidden", l), layers[l].w_hidden);
    add(fmt::format("lstm.{}.bias", l), layers[l].bias);
  }
  add("head.weight", head_w);
  add("head.bias", head_b);
  return out;
}

std::size_t SlipParams::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(head_w.size() + head_b.size());
  for (const auto& l : layers) n += static_cast<std::size_t>(l.w_input.size() + l.w_hidden.size() + l.bias.size());
  return n;
}

SlipModel SlipModel::zeros(const SlipArchitecture& arch) {
  arch.validate();
  SlipModel m;
  m.arch = arch;
  m.params = SlipParams::zeros(arch);
  return m;
}

SlipModel SlipModel::initialize(const SlipArchitecture& arch, std::uint64_t seed) {
  SlipModel m = zeros(arch);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(arch.hidden));
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (auto& block : m.params.blocks())
    for (std::size_t i = 0; i < block.size(); ++i) block.data[i] = uni(rng);
  const auto h = static_cast<Eigen::Index>(arch.hidden);
  for (auto& layer : m.params.layers) layer.bias.segment(h, h).setOnes();
  return m;
}

void SlipModel::validate() const {
  arch.validate();
  if (params.layers.size() != arch.layers)
    throw ValidationError(fmt::format("model has {} layers, architecture says {}", params.layers.size(), arch.layers));
  const auto gates = static_cast<Eigen::Index>(4 * arch.hidden);
  const auto h = static_cast<Eigen::Index>(arch.hidden);
  for (std::size_t l = 0; l < arch.layers; ++l) {
    const auto in = static_cast<Eigen::Index>(l == 0 ? arch.input : arch.hidden);
    const auto& L = params.layers[l];
    if (L.w_input.rows() != gates || L.w_input.cols() != in || L.w_hidden.rows() != gates ||
        L.w_hidden.cols() != h || L.bias.size() != gates)
      throw ValidationError(fmt::format("layer {} tensor shapes disagree with the architecture", l));
  }
  if (params.head_w.rows() != static_cast<Eigen::Index>(arch.classes) || params.head_w.cols() != h ||
      params.head_b.size() != static_cast<Eigen::Index>(arch.classes))
    throw ValidationError("head tensor shapes disagree with the architecture");
  if (arch.input != kFeatureCount || arch.classes != kClassCount)
    throw ValidationError("slip models take 7 features and produce 3 classes");
  if (feature_order.size() != kFeatureOrder.size() ||
      !std::equal(feature_order.begin(), feature_order.end(), kFeatureOrder.begin()))
    throw ValidationError("model feature order differs from strawberry_area,gripper_area,background_area,w,h,x,y");
  for (double s : input_scale)
    if (!(s > 0.0)) throw ValidationError("input scale entries must be > 0");
}

namespace {

ArrayXXd sigmoid(const ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

ArrayXXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  ArrayXXd mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = keep(rng) ? scale : 0.0;
  return mask;
}

struct StepCache {
  MatrixXd input;   // in x B, as fed to this layer
  ArrayXXd i, f, g, o;
  ArrayXXd c, c_prev, h_prev;
};

/// Forward pass over a batch, keeping everything backward needs.
struct BatchForward {
  std::size_t steps = 0;
  Eigen::Index batch = 0;
  std::vector<std::vector<StepCache>> cache;    // [layer][t]
  std::vector<std::vector<ArrayXXd>> masks;     // [layer][t], layers 0..L-2
  ArrayXXd head_mask;
  MatrixXd head_in;                             // masked final hidden, H x B
  MatrixXd probs;                               // C x B

  BatchForward(const SlipModel& model, std::span<const SlipWindow> windows, Rng* dropout_rng) {
    const auto& arch = model.arch;
    steps = kWindowLength;
    batch = static_cast<Eigen::Index>(windows.size());
    const auto h = static_cast<Eigen::Index>(arch.hidden);

    std::vector<MatrixXd> seq(steps, MatrixXd(static_cast<Eigen::Index>(arch.input), batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < steps; ++t) {
        const auto v = windows[static_cast<std::size_t>(b)].frames[t].as_array();
        for (std::size_t k = 0; k < kFeatureCount; ++k)
          seq[t](static_cast<Eigen::Index>(k), b) = (v[k] - model.input_mean[k]) / model.input_scale[k];
      }
    }

    cache.resize(arch.layers);
    masks.resize(arch.layers);
    for (std::size_t l = 0; l < arch.layers; ++l) {
      const auto& P = model.params.layers[l];
      ArrayXXd h_prev = ArrayXXd::Zero(h, batch);
      ArrayXXd c_prev = ArrayXXd::Zero(h, batch);
      cache[l].resize(steps);
      const bool drop = dropout_rng && l + 1 < arch.layers && arch.dropout_between > 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        StepCache& s = cache[l][t];
        s.input = seq[t];
        MatrixXd z = P.w_input * s.input + P.w_hidden * h_prev.matrix();
        z.colwise() += P.bias;
        s.i = sigmoid(z.topRows(h).array());
        s.f = sigmoid(z.middleRows(h, h).array());
        s.g = z.middleRows(2 * h, h).array().tanh();
        s.o = sigmoid(z.bottomRows(h).array());
        s.c_prev = c_prev;
        s.h_prev = h_prev;
        s.c = s.f * c_prev + s.i * s.g;
        h_prev = s.o * s.c.tanh();
        c_prev = s.c;
        if (drop) {
          masks[l].push_back(dropout_mask(h, batch, arch.dropout_between, *dropout_rng));
          seq[t] = (h_prev * masks[l].back()).matrix();
        } else {
          seq[t] = h_prev.matrix();
        }
      }
    }

    head_in = seq[steps - 1];
    if (dropout_rng && arch.dropout_head > 0.0) {
      head_mask = dropout_mask(h, batch, arch.dropout_head, *dropout_rng);
      head_in = (head_in.array() * head_mask).matrix();
    }
    MatrixXd logits = model.params.head_w * head_in;
    logits.colwise() += model.params.head_b;
    probs.resize(logits.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const VectorXd e = (logits.col(b).array() - logits.col(b).maxCoeff()).exp();
      probs.col(b) = e / e.sum();
    }
  }

  double loss(std::span<const SlipWindow> windows) const {
    double total = 0.0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto y = static_cast<Eigen::Index>(windows[static_cast<std::size_t>(b)].label);
      total -= std::log(std::max(probs(y, b), std::numeric_limits<double>::min()));
    }
    return total / static_cast<double>(batch);
  }

  void backward(const SlipModel& model, std::span<const SlipWindow> windows, SlipParams& grad) const {
    const auto& arch = model.arch;
    const auto h = static_cast<Eigen::Index>(arch.hidden);
    MatrixXd dlogits = probs;
    for (Eigen::Index b = 0; b < batch; ++b)
      dlogits(static_cast<Eigen::Index>(windows[static_cast<std::size_t>(b)].label), b) -= 1.0;
    dlogits /= static_cast<double>(batch);

    grad.head_w = dlogits * head_in.transpose();
    grad.head_b = dlogits.rowwise().sum();
    MatrixXd d_top = model.params.head_w.transpose() * dlogits;
    if (head_mask.size() > 0) d_top = (d_top.array() * head_mask).matrix();

    // Gradient arriving at each timestep's output of the current layer.
    std::vector<MatrixXd> d_out(steps, MatrixXd::Zero(h, batch));
    d_out[steps - 1] = d_top;

    for (std::size_t li = arch.layers; li-- > 0;) {
      const auto& P = model.params.layers[li];
      auto& G = grad.layers[li];
      G.w_input.setZero();
      G.w_hidden.setZero();
      G.bias.setZero();
      ArrayXXd dh_next = ArrayXXd::Zero(h, batch);
      ArrayXXd dc_next = ArrayXXd::Zero(h, batch);
      std::vector<MatrixXd> d_in(steps);
      MatrixXd dz(4 * h, batch);
      for (std::size_t t = steps; t-- > 0;) {
        const StepCache& s = cache[li][t];
        const ArrayXXd dh = d_out[t].array() + dh_next;
        const ArrayXXd tanh_c = s.c.tanh();
        const ArrayXXd dc = dh * s.o * (1.0 - tanh_c.square()) + dc_next;
        dz.topRows(h) = (dc * s.g * s.i * (1.0 - s.i)).matrix();
        dz.middleRows(h, h) = (dc * s.c_prev * s.f * (1.0 - s.f)).matrix();
        dz.middleRows(2 * h, h) = (dc * s.i * (1.0 - s.g.square())).matrix();
        dz.bottomRows(h) = (dh * tanh_c * s.o * (1.0 - s.o)).matrix();
        dc_next = dc * s.f;
        G.w_input.noalias() += dz * s.input.transpose();
        G.w_hidden.noalias() += dz * s.h_prev.matrix().transpose();
        G.bias += dz.rowwise().sum();
        dh_next = (P.w_hidden.transpose() * dz).array();
        if (li > 0) d_in[t] = P.w_input.transpose() * dz;
      }
      if (li > 0) {
        for (std::size_t t = 0; t < steps; ++t)
          d_out[t] = masks[li - 1].empty() ? d_in[t] : (d_in[t].array() * masks[li - 1][t]).matrix();
      }
    }
  }
};

void check_window_compatible(const SlipModel& model) {
  if (model.arch.input != kFeatureCount) throw ValidationError("model input size must be 7");
  if (model.params.layers.size() != model.arch.layers) throw ValidationError("model tensors missing");
}

SlipProbabilities to_probs(const MatrixXd& probs, Eigen::Index b) {
  return {probs(0, b), probs(1, b), probs(2, b)};
}

}  // namespace

SlipProbabilities lstm_forward(const SlipModel& model, const SlipWindow& window, ForwardMode mode, Rng* rng) {
  check_window_compatible(model);
  if (mode == ForwardMode::Train && rng == nullptr) throw ValidationError("train-mode forward needs an RNG");
  const BatchForward fw(model, std::span<const SlipWindow>(&window, 1), mode == ForwardMode::Train ? rng : nullptr);
  return to_probs(fw.probs, 0);
}

std::vector<SlipProbabilities> lstm_predict(const SlipModel& model, std::span<const SlipWindow> windows) {
  check_window_compatible(model);
  std::vector<SlipProbabilities> out;
  out.reserve(windows.size());
  constexpr std::size_t chunk = 256;
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const auto part = windows.subspan(start, std::min(chunk, windows.size() - start));
    const BatchForward fw(model, part, nullptr);
    for (Eigen::Index b = 0; b < fw.batch; ++b) out.push_back(to_probs(fw.probs, b));
  }
  return out;
}

double loss_and_gradient(const SlipModel& model, std::span<const SlipWindow> batch, SlipParams* grad,
                         Rng* dropout_rng) {
  check_window_compatible(model);
  if (batch.empty()) throw ValidationError("loss_and_gradient: empty batch");
  const BatchForward fw(model, batch, dropout_rng);
  if (grad != nullptr) {
    if (grad->layers.size() != model.arch.layers) *grad = SlipParams::zeros(model.arch);
    fw.backward(model, batch, *grad);
  }
  return fw.loss(batch);
}

namespace {

void standardize_from(SlipModel& model, std::span<const SlipWindow> windows) {
  std::array<double, kFeatureCount> sum{}, sq{};
  double n = 0;
  for (const auto& w : windows)
    for (const auto& f : w.frames) {
      const auto v = f.as_array();
      for (std::size_t k = 0; k < kFeatureCount; ++k) {
        sum[k] += v[k];
        sq[k] += v[k] * v[k];
      }
      n += 1;
    }
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sq[k] / n - mean * mean);
    model.input_mean[k] = mean;
    model.input_scale[k] = std::sqrt(var) > 1e-6 ? std::sqrt(var) : 1.0;
  }
}

double mean_loss(const SlipModel& model, std::span<const SlipWindow> windows) {
  double total = 0.0;
  constexpr std::size_t chunk = 256;
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const auto part = windows.subspan(start, std::min(chunk, windows.size() - start));
    total += loss_and_gradient(model, part, nullptr) * static_cast<double>(part.size());
  }
  return total / static_cast<double>(windows.size());
}

}  // namespace

SlipModel lstm_train(std::span<const SlipWindow> train, std::span<const SlipWindow> validation,
                     const TrainingHyperparameters& hp, const SlipArchitecture& arch,
                     const EpochCallback& on_epoch) {
  hp.validate();
  arch.validate();
  if (train.empty()) throw ValidationError("training set is empty");

  SlipModel model = SlipModel::initialize(arch, hp.seed);
  standardize_from(model, train);
  model.training = hp;

  // Separate streams so changing the batch order never changes dropout masks.
  Rng order_rng = derive_rng(hp.seed, 1);
  Rng dropout_rng = derive_rng(hp.seed, 2);
  SlipParams grad = SlipParams::zeros(arch);
  SlipParams velocity = SlipParams::zeros(arch);
  std::vector<std::size_t> order(train.size());
  std::vector<SlipWindow> batch;
  batch.reserve(hp.batch_size);

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + hp.batch_size); ++i)
        batch.push_back(train[order[i]]);
      epoch_loss += loss_and_gradient(model, batch, &grad, &dropout_rng) * static_cast<double>(batch.size());

      auto g_blocks = grad.blocks();
      if (hp.clip_norm > 0.0) {
        double norm2 = 0.0;
        for (const auto& b : g_blocks)
          for (std::size_t i = 0; i < b.size(); ++i) norm2 += b.data[i] * b.data[i];
        const double norm = std::sqrt(norm2);
        if (norm > hp.clip_norm)
          for (auto& b : g_blocks)
            for (std::size_t i = 0; i < b.size(); ++i) b.data[i] *= hp.clip_norm / norm;
      }
      auto p_blocks = model.params.blocks();
      auto v_blocks = velocity.blocks();
      for (std::size_t k = 0; k < p_blocks.size(); ++k) {
        for (std::size_t i = 0; i < p_blocks[k].size(); ++i) {
          double& v = v_blocks[k].data[i];
          v = hp.momentum * v - hp.learning_rate * g_blocks[k].data[i];
          p_blocks[k].data[i] += v;
        }
      }
    }
    epoch_loss /= static_cast<double>(train.size());
    model.loss_history.push_back(epoch_loss);
    if (on_epoch) {
      const double val = validation.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_loss(model, validation);
      on_epoch(epoch, epoch_loss, val);
    }
  }
  return model;
}

// ---------------------------------------------------------------- persistence

namespace {

constexpr const char* kSlipFormat = "harvest_guard.slip_model";

}  // namespace

std::string serialize_model(const SlipModel& model) {
  model.validate();
  nlohmann::ordered_json j;
  j["format"] = kSlipFormat;
  j["version"] = 1;
  j["architecture"] = {{"layers", model.arch.layers},
                       {"hidden", model.arch.hidden},
                       {"input", model.arch.input},
                       {"classes", model.arch.classes},
                       {"dropout_between", model.arch.dropout_between},
                       {"dropout_head", model.arch.dropout_head}};
  j["feature_order"] = model.feature_order;
  j["normalization"] = {{"mean", model.input_mean}, {"scale", model.input_scale}};
  if (model.training) {
    const auto& hp = *model.training;
    j["training"] = {{"seed", hp.seed},         {"epochs", hp.epochs},     {"learning_rate", hp.learning_rate},
                     {"batch_size", hp.batch_size}, {"momentum", hp.momentum}, {"clip_norm", hp.clip_norm},
                     {"loss_history", model.loss_history}};
  }
  auto params = model.params;  // blocks() needs mutable access
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& b : params.blocks()) {
    // Eigen storage is column-major; the file records that explicitly.
    tensors.push_back({{"name", b.name},
                       {"shape", {b.rows, b.cols}},
                       {"order", "column-major"},
                       {"data", std::vector<double>(b.data, b.data + b.size())}});
  }
  j["tensors"] = std::move(tensors);
  return j.dump(1) + "\n";
}

SlipModel deserialize_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("slip model is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != kSlipFormat) throw ValidationError("not a slip model file");
    SlipModel m;
    const auto& a = j.at("architecture");
    m.arch.layers = a.at("layers");
    m.arch.hidden = a.at("hidden");
    m.arch.input = a.at("input");
    m.arch.classes = a.at("classes");
    m.arch.dropout_between = a.at("dropout_between");
    m.arch.dropout_head = a.at("dropout_head");
    m.arch.validate();
    m.params = SlipParams::zeros(m.arch);
    m.feature_order = j.at("feature_order").get<std::vector<std::string>>();
    m.input_mean = j.at("normalization").at("mean").get<std::array<double, kFeatureCount>>();
    m.input_scale = j.at("normalization").at("scale").get<std::array<double, kFeatureCount>>();
    if (j.contains("training")) {
      const auto& t = j.at("training");
      TrainingHyperparameters hp;
      hp.seed = t.at("seed");
      hp.epochs = t.at("epochs");
      hp.learning_rate = t.at("learning_rate");
      hp.batch_size = t.at("batch_size");
      hp.momentum = t.at("momentum");
      hp.clip_norm = t.at("clip_norm");
      m.training = hp;
      m.loss_history = t.at("loss_history").get<std::vector<double>>();
    }
    auto blocks = m.params.blocks();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != blocks.size())
      throw ValidationError(fmt::format("expected {} tensors, file has {}", blocks.size(), tensors.size()));
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& t = tensors[k];
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (t.at("name") != blocks[k].name || shape.size() != 2 || shape[0] != blocks[k].rows ||
          shape[1] != blocks[k].cols)
        throw ValidationError(fmt::format("tensor {} does not match expected {} [{}x{}]", k, blocks[k].name,
                                          blocks[k].rows, blocks[k].cols));
      const auto data = t.at("data").get<std::vector<double>>();
      if (data.size() != blocks[k].size()) throw ValidationError("tensor " + blocks[k].name + " has wrong length");
      std::copy(data.begin(), data.end(), blocks[k].data);
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed slip model: ") + e.what());
  }
}

void save_model(const SlipModel& model, const std::filesystem::path& path) {
  const auto text = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

SlipModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_model(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace harvest_guard::slip
