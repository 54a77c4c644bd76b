#include "romilab/approx/mlp.h"

#include <cmath>

#include "romilab/core/error.h"

namespace romilab::approx {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::swish: return "swish";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "swish") return Activation::swish;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Mat activate(Activation a, const Mat& z) {
  switch (a) {
    case Activation::linear: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::swish: return z.unaryExpr([](double v) { return v * sigmoid(v); });
  }
  return z;
}

// d(act)/dz evaluated at z, multiplied elementwise into g.
void apply_derivative(Activation a, const Mat& z, Mat& g) {
  switch (a) {
    case Activation::linear: return;
    case Activation::relu: g = g.cwiseProduct((z.array() > 0.0).cast<double>().matrix()); return;
    case Activation::swish:
      g = g.cwiseProduct(z.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s + v * s * (1.0 - s);
      }));
      return;
  }
}

}  // namespace

std::size_t expected_param_count(const std::vector<int>& dims) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    n += static_cast<std::size_t>(dims[i] + 1) * static_cast<std::size_t>(dims[i + 1]);
  return n;
}

void Mlp::layout() {
  if (dims_.size() < 2) throw ConfigError("an Mlp needs at least input and output widths");
  if (acts_.size() != dims_.size() - 1) throw ConfigError("one activation per layer required");
  for (int d : dims_)
    if (d < 1) throw ConfigError("layer widths must be >= 1");
  offsets_.clear();
  std::size_t off = 0;
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(dims_[l] + 1) * static_cast<std::size_t>(dims_[l + 1]);
  }
  params_ = Vec::Zero(static_cast<Eigen::Index>(off));
}

Mlp Mlp::zeros(std::vector<int> dims, std::vector<Activation> acts) {
  Mlp m;
  m.dims_ = std::move(dims);
  m.acts_ = std::move(acts);
  m.layout();
  return m;
}

Mlp::Mlp(std::vector<int> dims, std::vector<Activation> acts, Rng& rng)
    : dims_(std::move(dims)), acts_(std::move(acts)) {
  layout();
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    const double lim = std::sqrt(6.0 / (dims_[l] + dims_[l + 1]));
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = lim * (2.0 * uniform01(rng) - 1.0);
  }
}

Eigen::Map<Mat> Mlp::weight(std::size_t l) {
  return {params_.data() + offsets_[l], dims_[l + 1], dims_[l]};
}
Eigen::Map<const Mat> Mlp::weight(std::size_t l) const {
  return {params_.data() + offsets_[l], dims_[l + 1], dims_[l]};
}
Eigen::Map<Vec> Mlp::bias(std::size_t l) {
  return {params_.data() + offsets_[l] + static_cast<std::size_t>(dims_[l]) * dims_[l + 1],
          dims_[l + 1]};
}
Eigen::Map<const Vec> Mlp::bias(std::size_t l) const {
  return {params_.data() + offsets_[l] + static_cast<std::size_t>(dims_[l]) * dims_[l + 1],
          dims_[l + 1]};
}

Mat Mlp::forward(const Mat& x) const {
  if (x.rows() != in_dim())
    throw DimensionError("Mlp input has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(in_dim()));
  Mat h = x;
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    Mat z = weight(l) * h;
    z.colwise() += bias(l);
    h = activate(acts_[l], z);
  }
  return h;
}

Mat Mlp::forward(const Mat& x, Tape& tape) const {
  if (x.rows() != in_dim())
    throw DimensionError("Mlp input has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(in_dim()));
  tape.clear();
  Mat h = x;
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    tape.inputs.push_back(h);
    Mat z = weight(l) * h;
    z.colwise() += bias(l);
    h = activate(acts_[l], z);
    tape.pre.push_back(std::move(z));
  }
  return h;
}

Mat Mlp::backward(const Tape& tape, const Mat& d_out, Vec& grad) const {
  if (!tape.recorded() || tape.inputs.size() != acts_.size())
    throw StateError("backward called without a recorded forward pass");
  if (d_out.rows() != out_dim() || d_out.cols() != tape.inputs.back().cols())
    throw DimensionError("output gradient shape does not match the recorded pass");
  if (grad.size() != params_.size()) grad = Vec::Zero(params_.size());
  Mat g = d_out;
  for (std::size_t l = acts_.size(); l-- > 0;) {
    apply_derivative(acts_[l], tape.pre[l], g);
    Eigen::Map<Mat> gw(grad.data() + offsets_[l], dims_[l + 1], dims_[l]);
    Eigen::Map<Vec> gb(grad.data() + offsets_[l] + static_cast<std::size_t>(dims_[l]) * dims_[l + 1],
                       dims_[l + 1]);
    gw.noalias() += g * tape.inputs[l].transpose();
    gb += g.rowwise().sum();
    g = weight(l).transpose() * g;
  }
  return g;
}

nlohmann::json Mlp::architecture() const {
  nlohmann::json acts = nlohmann::json::array();
  for (auto a : acts_) acts.push_back(to_string(a));
  return {{"dims", dims_}, {"activations", acts}, {"param_count", param_count()}};
}

Container mlp_container(const std::vector<const Mlp*>& nets, const nlohmann::json& extra) {
  Container c;
  c.header["kind"] = "mlp";
  c.header["version"] = 1;
  c.header["networks"] = nlohmann::json::array();
  for (const Mlp* m : nets) {
    c.header["networks"].push_back(m->architecture());
    for (Eigen::Index i = 0; i < m->params().size(); ++i)
      c.payload.push_back(static_cast<float>(m->params()[i]));
  }
  if (!extra.is_null()) c.header["extra"] = extra;
  return c;
}

std::vector<Mlp> mlps_from_container(const Container& c) {
  if (c.header.value("kind", "") != "mlp") throw IoError("container is not an mlp checkpoint");
  std::vector<Mlp> out;
  std::size_t off = 0;
  for (const auto& arch : c.header.at("networks")) {
    std::vector<Activation> acts;
    for (const auto& a : arch.at("activations")) acts.push_back(parse_activation(a.get<std::string>()));
    Mlp m = Mlp::zeros(arch.at("dims").get<std::vector<int>>(), acts);
    if (off + m.param_count() > c.payload.size()) throw IoError("mlp checkpoint payload truncated");
    for (std::size_t i = 0; i < m.param_count(); ++i)
      m.params()[static_cast<Eigen::Index>(i)] = c.payload[off + i];
    off += m.param_count();
    out.push_back(std::move(m));
  }
  if (off != c.payload.size()) throw IoError("mlp checkpoint payload has trailing values");
  return out;
}

void save_mlps(const std::string& path, const std::vector<const Mlp*>& nets,
               const nlohmann::json& extra) {
  write_container(path, mlp_container(nets, extra));
}

std::vector<Mlp> load_mlps(const std::string& path, nlohmann::json* extra) {
  const Container c = read_container(path);
  if (extra) *extra = c.header.value("extra", nlohmann::json{});
  return mlps_from_container(c);
}

}  // namespace romilab::approx
