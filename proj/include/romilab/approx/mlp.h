#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "romilab/core/container.h"
#include "romilab/core/rng.h"

namespace romilab::approx {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Activation { linear, relu, swish };
std::string to_string(Activation a);
Activation parse_activation(std::string_view s);

// Activations recorded by a forward pass; backward() consumes them.
struct Tape {
  std::vector<Mat> inputs;  // input to each layer
  std::vector<Mat> pre;     // pre-activation of each layer
  bool recorded() const { return !inputs.empty(); }
  void clear() {
    inputs.clear();
    pre.clear();
  }
};

// Fully connected network. Samples are columns: forward maps a
// (dims.front() x B) batch to (dims.back() x B). All parameters live in one
// flat vector laid out layer by layer as [W (column-major), b].
class Mlp {
 public:
  Mlp() = default;
  // `acts` has one entry per affine layer. Weights use Glorot-uniform init,
  // biases start at zero.
  Mlp(std::vector<int> dims, std::vector<Activation> acts, Rng& rng);
  static Mlp zeros(std::vector<int> dims, std::vector<Activation> acts);

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Tape& tape) const;
  Vec forward_one(const Vec& x) const { return forward(Mat(x)).col(0); }

  // Accumulates d(loss)/d(params) into `grad` (size param_count()) given
  // d(loss)/d(output); returns d(loss)/d(input). StateError without a tape.
  Mat backward(const Tape& tape, const Mat& d_out, Vec& grad) const;

  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Activation>& activations() const { return acts_; }
  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return acts_.size(); }

  Eigen::Map<Mat> weight(std::size_t l);
  Eigen::Map<const Mat> weight(std::size_t l) const;
  Eigen::Map<Vec> bias(std::size_t l);
  Eigen::Map<const Vec> bias(std::size_t l) const;

  nlohmann::json architecture() const;

 private:
  void layout();

  std::vector<int> dims_;
  std::vector<Activation> acts_;
  std::vector<std::size_t> offsets_;  // start of each layer's W in params_
  Vec params_;
};

// Σ (d_in + 1) * d_out over layers.
std::size_t expected_param_count(const std::vector<int>& dims);

// Checkpoint: container whose header carries {"kind": "mlp", architecture,
// extra} and whose payload is the float32 flat parameter vector. Several
// networks go into one container via `save_mlps`.
Container mlp_container(const std::vector<const Mlp*>& nets, const nlohmann::json& extra = {});
std::vector<Mlp> mlps_from_container(const Container& c);
void save_mlps(const std::string& path, const std::vector<const Mlp*>& nets,
               const nlohmann::json& extra = {});
std::vector<Mlp> load_mlps(const std::string& path, nlohmann::json* extra = nullptr);

}  // namespace romilab::approx
