#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dib/tensor.hpp"

namespace dib {

enum class GateOp { And, Or, Xor };

std::string to_string(GateOp op);

/// A gate operand: input index (0-based) or index of an earlier gate.
struct GateRef {
  enum class Kind { Input, Gate } kind = Kind::Input;
  std::size_t index = 0;

  friend bool operator==(const GateRef&, const GateRef&) = default;
};

struct Gate {
  std::string id;
  GateOp op = GateOp::And;
  GateRef a, b;

  friend bool operator==(const Gate&, const Gate&) = default;
};

/// DAG of 2-input logic gates over binary inputs. Gates only reference inputs
/// or earlier gates; validate() enforces this and output reachability.
struct CircuitSpec {
  std::size_t n_inputs = 0;
  std::vector<Gate> gates;
  std::size_t output = 0;  ///< gate index

  void validate() const;
  /// Number of gates on the shortest path from input i to the output
  /// (0 if the input does not reach it).
  std::vector<std::size_t> shortest_gate_path() const;
  std::size_t depth() const;

  friend bool operator==(const CircuitSpec&, const CircuitSpec&) = default;
};

struct CircuitParseError : std::runtime_error {
  CircuitParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

/// Text format, one statement per line, `#` starts a comment:
///   inputs 10
///   g1 = AND x1 x2
///   g2 = XOR g1 x3
///   output g2
/// Inputs are 1-based (`x1`..`xN`); gate ids are any other identifier.
CircuitSpec parse_circuit(const std::string& text);
std::string serialize_circuit(const CircuitSpec& spec);
CircuitSpec load_circuit(const std::filesystem::path& file);

bool eval_circuit(const CircuitSpec& spec, std::span<const std::uint8_t> inputs);

/// All 2^n rows, input bit i of row r is (r >> i) & 1. Inputs are uniform.
struct TruthTable {
  std::size_t n_inputs = 0;
  std::vector<std::uint8_t> output;

  std::size_t rows() const { return output.size(); }
  std::uint8_t input_bit(std::size_t row, std::size_t i) const { return (row >> i) & 1u; }
  double output_entropy_bits() const;
  /// Inputs as an (rows x n) 0/1 matrix and outputs as rows x 1.
  Matrix input_matrix() const;
  Matrix output_matrix() const;
};

inline constexpr std::size_t kMaxTableInputs = 20;

TruthTable truth_table(const CircuitSpec& spec);

/// I(X_S; Y) in bits by exact enumeration; bit i of `subset` selects input i.
double exact_subset_mi(const TruthTable& table, std::uint64_t subset);

struct SubsetPoint {
  std::uint64_t mask = 0;
  std::size_t size_bits = 0;
  double mi_bits = 0.0;
  bool pareto = false;
};

/// One point per subset (index == mask). A point is on the Pareto front when
/// it attains the best MI for its size and strictly improves on every smaller
/// size. Throws ContractError for n > kMaxTableInputs.
std::vector<SubsetPoint> subset_scatter(const TruthTable& table);

/// Best point per strictly improving budget, ascending in size.
std::vector<SubsetPoint> pareto_front(std::span<const SubsetPoint> scatter);

/// Columns: subset_bitmask,size_bits,mi_bits,pareto_flag
void write_subsets_csv(std::ostream& os, std::span<const SubsetPoint> scatter);

/// The repository's 10-input reference circuit (data/circuits/default10.circ).
CircuitSpec default_circuit();
const std::string& default_circuit_text();

}  // namespace dib
