#include "dib/circuit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace dib {

std::string to_string(GateOp op) {
  switch (op) {
    case GateOp::And: return "AND";
    case GateOp::Or: return "OR";
    case GateOp::Xor: return "XOR";
  }
  return "?";
}

namespace {

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

bool is_input_ref(const std::string& tok) {
  return tok.size() > 1 && tok[0] == 'x' &&
         std::all_of(tok.begin() + 1, tok.end(), [](char c) { return std::isdigit(c); });
}

}  // namespace

void CircuitSpec::validate() const {
  if (n_inputs == 0) throw ContractError("circuit: needs at least one input");
  if (gates.empty()) throw ContractError("circuit: needs at least one gate");
  for (std::size_t g = 0; g < gates.size(); ++g) {
    for (const GateRef& r : {gates[g].a, gates[g].b}) {
      if (r.kind == GateRef::Kind::Input && r.index >= n_inputs)
        throw ContractError("circuit: gate " + gates[g].id + " references missing input");
      if (r.kind == GateRef::Kind::Gate && r.index >= g)
        throw ContractError("circuit: gate " + gates[g].id +
                            " references a gate that is not defined earlier");
    }
  }
  if (output >= gates.size()) throw ContractError("circuit: output gate out of range");
  const auto paths = shortest_gate_path();
  if (std::all_of(paths.begin(), paths.end(), [](std::size_t p) { return p == 0; }))
    throw ContractError("circuit: output is not reachable from any input");
}

std::vector<std::size_t> CircuitSpec::shortest_gate_path() const {
  // dist[g] = gates from g's output to the circuit output, inclusive of g.
  constexpr std::size_t kNone = ~std::size_t{0};
  std::vector<std::size_t> dist(gates.size(), kNone);
  std::vector<std::size_t> input_dist(n_inputs, kNone);
  if (output < gates.size()) dist[output] = 1;
  for (std::size_t g = gates.size(); g-- > 0;) {
    if (dist[g] == kNone) continue;
    for (const GateRef& r : {gates[g].a, gates[g].b}) {
      auto& target = r.kind == GateRef::Kind::Input ? input_dist[r.index] : dist[r.index];
      const std::size_t d = r.kind == GateRef::Kind::Input ? dist[g] : dist[g] + 1;
      target = std::min(target, d);
    }
  }
  std::vector<std::size_t> out(n_inputs);
  for (std::size_t i = 0; i < n_inputs; ++i) out[i] = input_dist[i] == kNone ? 0 : input_dist[i];
  return out;
}

std::size_t CircuitSpec::depth() const {
  std::vector<std::size_t> level(gates.size(), 0);
  for (std::size_t g = 0; g < gates.size(); ++g) {
    std::size_t l = 0;
    for (const GateRef& r : {gates[g].a, gates[g].b})
      if (r.kind == GateRef::Kind::Gate) l = std::max(l, level[r.index]);
    level[g] = l + 1;
  }
  return level.at(output);
}

CircuitSpec parse_circuit(const std::string& text) {
  CircuitSpec spec;
  std::map<std::string, std::size_t> gate_index;
  bool have_inputs = false, have_output = false;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;

  auto parse_ref = [&](const std::string& tok) -> GateRef {
    if (is_input_ref(tok)) {
      const std::size_t i = std::stoul(tok.substr(1));
      if (i == 0 || i > spec.n_inputs)
        throw CircuitParseError(lineno, "input '" + tok + "' out of range 1.." +
                                            std::to_string(spec.n_inputs));
      return {GateRef::Kind::Input, i - 1};
    }
    auto it = gate_index.find(tok);
    if (it == gate_index.end())
      throw CircuitParseError(lineno, "'" + tok + "' is not an input or an earlier gate");
    return {GateRef::Kind::Gate, it->second};
  };

  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    if (tok[0] == "inputs") {
      if (have_inputs) throw CircuitParseError(lineno, "duplicate 'inputs' line");
      if (tok.size() != 2) throw CircuitParseError(lineno, "expected 'inputs <n>'");
      try {
        spec.n_inputs = std::stoul(tok[1]);
      } catch (const std::exception&) {
        throw CircuitParseError(lineno, "bad input count '" + tok[1] + "'");
      }
      if (spec.n_inputs == 0) throw CircuitParseError(lineno, "input count must be positive");
      have_inputs = true;
    } else if (tok[0] == "output") {
      if (have_output) throw CircuitParseError(lineno, "duplicate 'output' line");
      if (tok.size() != 2) throw CircuitParseError(lineno, "expected 'output <gate>'");
      const GateRef r = parse_ref(tok[1]);
      if (r.kind != GateRef::Kind::Gate)
        throw CircuitParseError(lineno, "output must name a gate");
      spec.output = r.index;
      have_output = true;
    } else {
      if (!have_inputs) throw CircuitParseError(lineno, "'inputs <n>' must come first");
      if (have_output) throw CircuitParseError(lineno, "gate after 'output'");
      if (tok.size() != 5 || tok[1] != "=")
        throw CircuitParseError(lineno, "expected '<id> = <AND|OR|XOR> <ref> <ref>'");
      if (is_input_ref(tok[0]) || tok[0] == "inputs" || tok[0] == "output")
        throw CircuitParseError(lineno, "'" + tok[0] + "' is not a valid gate id");
      if (gate_index.count(tok[0]))
        throw CircuitParseError(lineno, "gate '" + tok[0] + "' defined twice");
      Gate g;
      g.id = tok[0];
      if (tok[2] == "AND") g.op = GateOp::And;
      else if (tok[2] == "OR") g.op = GateOp::Or;
      else if (tok[2] == "XOR") g.op = GateOp::Xor;
      else throw CircuitParseError(lineno, "unknown gate op '" + tok[2] + "'");
      g.a = parse_ref(tok[3]);
      g.b = parse_ref(tok[4]);
      gate_index[g.id] = spec.gates.size();
      spec.gates.push_back(std::move(g));
    }
  }
  if (!have_inputs) throw CircuitParseError(lineno, "missing 'inputs' line");
  if (!have_output) throw CircuitParseError(lineno, "missing 'output' line");
  try {
    spec.validate();
  } catch (const ContractError& e) {
    throw CircuitParseError(lineno, e.what());
  }
  return spec;
}

std::string serialize_circuit(const CircuitSpec& spec) {
  std::ostringstream os;
  auto ref = [&](const GateRef& r) {
    return r.kind == GateRef::Kind::Input ? "x" + std::to_string(r.index + 1)
                                          : spec.gates[r.index].id;
  };
  os << "inputs " << spec.n_inputs << '\n';
  for (const Gate& g : spec.gates)
    os << g.id << " = " << to_string(g.op) << ' ' << ref(g.a) << ' ' << ref(g.b) << '\n';
  os << "output " << spec.gates.at(spec.output).id << '\n';
  return os.str();
}

CircuitSpec load_circuit(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open circuit spec " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_circuit(ss.str());
}

bool eval_circuit(const CircuitSpec& spec, std::span<const std::uint8_t> inputs) {
  if (inputs.size() != spec.n_inputs)
    throw DimensionError("eval_circuit: expected " + std::to_string(spec.n_inputs) +
                         " inputs, got " + std::to_string(inputs.size()));
  std::vector<std::uint8_t> value(spec.gates.size());
  auto get = [&](const GateRef& r) -> std::uint8_t {
    return r.kind == GateRef::Kind::Input ? (inputs[r.index] & 1u) : value[r.index];
  };
  for (std::size_t g = 0; g < spec.gates.size(); ++g) {
    const std::uint8_t a = get(spec.gates[g].a), b = get(spec.gates[g].b);
    switch (spec.gates[g].op) {
      case GateOp::And: value[g] = a & b; break;
      case GateOp::Or: value[g] = a | b; break;
      case GateOp::Xor: value[g] = a ^ b; break;
    }
  }
  return value[spec.output] != 0;
}

double TruthTable::output_entropy_bits() const {
  std::size_t ones = 0;
  for (auto y : output) ones += y;
  return binary_entropy(static_cast<double>(ones) / static_cast<double>(rows()));
}

Matrix TruthTable::input_matrix() const {
  Matrix m(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(n_inputs));
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t i = 0; i < n_inputs; ++i)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = input_bit(r, i);
  return m;
}

Matrix TruthTable::output_matrix() const {
  Matrix m(static_cast<Eigen::Index>(rows()), 1);
  for (std::size_t r = 0; r < rows(); ++r) m(static_cast<Eigen::Index>(r), 0) = output[r];
  return m;
}

TruthTable truth_table(const CircuitSpec& spec) {
  spec.validate();
  if (spec.n_inputs > kMaxTableInputs)
    throw ContractError("truth_table: " + std::to_string(spec.n_inputs) +
                        " inputs exceeds the enumeration limit of " +
                        std::to_string(kMaxTableInputs));
  TruthTable t;
  t.n_inputs = spec.n_inputs;
  const std::size_t rows = std::size_t{1} << spec.n_inputs;
  t.output.resize(rows);
  std::vector<std::uint8_t> bits(spec.n_inputs);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < spec.n_inputs; ++i) bits[i] = (r >> i) & 1u;
    t.output[r] = eval_circuit(spec, bits) ? 1 : 0;
  }
  return t;
}

double exact_subset_mi(const TruthTable& table, std::uint64_t subset) {
  const std::size_t rows = table.rows();
  subset &= rows - 1;
  if (subset == 0) return 0.0;
  // Rows sharing (row & subset) form one conditioning cell.
  std::vector<std::uint32_t> total(rows, 0), ones(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t key = r & subset;
    ++total[key];
    ones[key] += table.output[r];
  }
  double h_cond = 0.0;
  for (std::size_t k = 0; k < rows; ++k) {
    if (total[k] == 0) continue;
    h_cond += static_cast<double>(total[k]) / static_cast<double>(rows) *
              binary_entropy(static_cast<double>(ones[k]) / static_cast<double>(total[k]));
  }
  return std::max(0.0, table.output_entropy_bits() - h_cond);
}

std::vector<SubsetPoint> subset_scatter(const TruthTable& table) {
  if (table.n_inputs > kMaxTableInputs)
    throw ContractError("subset_scatter: refusing to enumerate 2^" +
                        std::to_string(table.n_inputs) + " subsets (limit n <= " +
                        std::to_string(kMaxTableInputs) + ")");
  const std::uint64_t count = std::uint64_t{1} << table.n_inputs;
  std::vector<SubsetPoint> pts(count);
  std::vector<double> best(table.n_inputs + 1, 0.0);
  for (std::uint64_t m = 0; m < count; ++m) {
    pts[m].mask = m;
    pts[m].size_bits = static_cast<std::size_t>(std::popcount(m));
    pts[m].mi_bits = exact_subset_mi(table, m);
    best[pts[m].size_bits] = std::max(best[pts[m].size_bits], pts[m].mi_bits);
  }
  constexpr double kTie = 1e-12;
  std::vector<bool> improving(best.size(), false);
  double running = -1.0;
  for (std::size_t s = 0; s < best.size(); ++s) {
    improving[s] = best[s] > running + kTie;
    running = std::max(running, best[s]);
  }
  for (auto& p : pts)
    p.pareto = improving[p.size_bits] && p.mi_bits >= best[p.size_bits] - kTie;
  return pts;
}

std::vector<SubsetPoint> pareto_front(std::span<const SubsetPoint> scatter) {
  std::vector<SubsetPoint> front;
  for (const auto& p : scatter) {
    if (!p.pareto) continue;
    auto it = std::find_if(front.begin(), front.end(),
                           [&](const SubsetPoint& f) { return f.size_bits == p.size_bits; });
    if (it == front.end()) front.push_back(p);
  }
  std::sort(front.begin(), front.end(),
            [](const SubsetPoint& a, const SubsetPoint& b) { return a.size_bits < b.size_bits; });
  return front;
}

void write_subsets_csv(std::ostream& os, std::span<const SubsetPoint> scatter) {
  os << "subset_bitmask,size_bits,mi_bits,pareto_flag\n";
  const auto prec = os.precision(12);
  for (const auto& p : scatter)
    os << p.mask << ',' << p.size_bits << ',' << p.mi_bits << ',' << (p.pareto ? 1 : 0) << '\n';
  os.precision(prec);
}

const std::string& default_circuit_text() {
  static const std::string text = R"(inputs 10
g1 = OR x1 x2
g2 = OR g1 x4
g3 = AND x3 g2
g4 = OR x5 x6
g5 = OR x7 x8
g6 = XOR g4 g5
g7 = AND x9 x10
g8 = AND g6 g7
g9 = XOR g3 g8
output g9
)";
  return text;
}

CircuitSpec default_circuit() { return parse_circuit(default_circuit_text()); }

}  // namespace dib
