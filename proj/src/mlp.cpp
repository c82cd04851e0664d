#include "dib/mlp.hpp"

#include <cmath>
#include <sstream>

namespace dib {

MlpArch make_mlp(std::size_t input_dim, std::size_t hidden, std::size_t width, Activation act,
                 std::size_t out, double alpha) {
  MlpArch arch{input_dim, {}};
  for (std::size_t i = 0; i < hidden; ++i) arch.layers.push_back({width, act, alpha});
  arch.layers.push_back({out, Activation::Identity, alpha});
  return arch;
}

std::string to_string(const LayerSpec& layer) {
  std::ostringstream os;
  os << layer.units << ':';
  switch (layer.activation) {
    case Activation::Identity: os << "identity"; break;
    case Activation::Tanh: os << "tanh"; break;
    case Activation::LeakyRelu: os << "leaky_relu:" << layer.alpha; break;
  }
  return os.str();
}

LayerSpec parse_layer(const std::string& text) {
  std::istringstream is(text);
  std::string units, act, alpha;
  std::getline(is, units, ':');
  std::getline(is, act, ':');
  std::getline(is, alpha, ':');
  LayerSpec layer;
  try {
    layer.units = std::stoul(units);
  } catch (const std::exception&) {
    throw ContractError("layer spec '" + text + "': bad unit count");
  }
  if (act == "identity" || act.empty()) {
    layer.activation = Activation::Identity;
  } else if (act == "tanh") {
    layer.activation = Activation::Tanh;
  } else if (act == "leaky_relu") {
    layer.activation = Activation::LeakyRelu;
    if (!alpha.empty()) layer.alpha = std::stod(alpha);
  } else {
    throw ContractError("layer spec '" + text + "': unknown activation '" + act + "'");
  }
  if (layer.units == 0) throw ContractError("layer spec '" + text + "': zero units");
  return layer;
}

std::string to_string(const MlpArch& arch) {
  std::string out = "in=" + std::to_string(arch.input_dim);
  for (const auto& l : arch.layers) out += ";" + to_string(l);
  return out;
}

MlpArch parse_arch(const std::string& text) {
  std::istringstream is(text);
  std::string tok;
  MlpArch arch;
  bool first = true;
  while (std::getline(is, tok, ';')) {
    if (first) {
      if (tok.rfind("in=", 0) != 0) throw ContractError("arch '" + text + "': missing in=");
      arch.input_dim = std::stoul(tok.substr(3));
      first = false;
      continue;
    }
    arch.layers.push_back(parse_layer(tok));
  }
  if (first) throw ContractError("arch: empty description");
  return arch;
}

std::string weight_path(const std::string& prefix, std::size_t layer) {
  return prefix + "/layer" + std::to_string(layer) + "/weight";
}

std::string bias_path(const std::string& prefix, std::size_t layer) {
  return prefix + "/layer" + std::to_string(layer) + "/bias";
}

void init_mlp(ParamStore& store, const std::string& prefix, const MlpArch& arch, Rng& rng,
              double head_std) {
  std::size_t fan_in = arch.input_dim;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const std::size_t fan_out = arch.layers[i].units;
    const bool head = i + 1 == arch.layers.size();
    const double std_dev = (head && head_std > 0.0)
                               ? head_std
                               : std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = sample_standard_normal(rng, {fan_in, fan_out});
    for (auto& v : w.values()) v *= std_dev;
    store.add(weight_path(prefix, i), std::move(w));
    store.add(bias_path(prefix, i), Tensor({1, fan_out}));
    fan_in = fan_out;
  }
}

Var mlp_forward(ParamStore& store, Var input, const MlpArch& arch, const std::string& prefix) {
  Tape& tape = *input.tape();
  Var h = input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& layer = arch.layers[i];
    Var w = tape.param(store, weight_path(prefix, i));
    Var b = tape.param(store, bias_path(prefix, i));
    if (h.cols() != w.rows() || w.cols() != static_cast<Eigen::Index>(layer.units))
      throw DimensionError(prefix + " layer " + std::to_string(i) + ": input has " +
                           std::to_string(h.cols()) + " columns, weight is " +
                           std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
    h = add_bias(matmul(h, w), b);
    switch (layer.activation) {
      case Activation::Identity: break;
      case Activation::Tanh: h = tanh(h); break;
      case Activation::LeakyRelu: h = leaky_relu(h, layer.alpha); break;
    }
  }
  return h;
}

Matrix mlp_apply(const ParamStore& store, const Matrix& input, const MlpArch& arch,
                 const std::string& prefix) {
  Matrix h = input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& layer = arch.layers[i];
    const auto w = store.param(weight_path(prefix, i)).matrix();
    const auto b = store.param(bias_path(prefix, i)).matrix();
    if (h.cols() != w.rows())
      throw DimensionError(prefix + " layer " + std::to_string(i) + ": input has " +
                           std::to_string(h.cols()) + " columns, weight has " +
                           std::to_string(w.rows()) + " rows");
    Matrix z = h * w;
    z.rowwise() += b.row(0);
    switch (layer.activation) {
      case Activation::Identity: break;
      case Activation::Tanh: z = z.array().tanh(); break;
      case Activation::LeakyRelu: {
        const double a = layer.alpha;
        z = z.unaryExpr([a](double x) { return x > 0.0 ? x : a * x; });
        break;
      }
    }
    h = std::move(z);
  }
  return h;
}

}  // namespace dib
