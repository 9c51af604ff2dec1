#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rspv::qsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using BasisIndex = std::uint64_t;

// Sparse storage addresses qubits with a 64-bit basis index.
inline constexpr int kIndexBits = 64;
inline constexpr double kPruneWeight = 1e-12;
inline constexpr double kUnitaryTol = 1e-10;

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonUnitaryGate : SimError { using SimError::SimError; };
struct IndexOutOfRange : SimError { using SimError::SimError; };
struct WidthMismatch : SimError { using SimError::SimError; };
struct OverlappingPairs : SimError { using SimError::SimError; };
struct EmptySelection : SimError { using SimError::SimError; };
struct DimensionMismatch : SimError { using SimError::SimError; };
struct LayoutError : SimError { using SimError::SimError; };
struct WriteOnceViolation : SimError { using SimError::SimError; };

enum class RegKind { quantum, classical };
enum class Side { client, server };

struct RegisterEntry {
    std::string name;
    RegKind kind;
    int width;
    Side side;
    int offset;  // first global qubit for quantum registers, -1 otherwise
};

class RegisterLayout {
public:
    explicit RegisterLayout(int max_qubits = 24);

    void add(const std::string& name, RegKind kind, int width, Side side = Side::server);
    // Drops the entry; quantum offsets above it shift down by its width.
    void erase(const std::string& name);

    bool contains(const std::string& name) const;
    const RegisterEntry& entry(const std::string& name) const;
    int qubit(const std::string& name, int i) const;
    std::vector<int> qubits(const std::string& name) const;
    std::vector<int> qubits(const std::vector<std::string>& names) const;

    int quantum_width() const { return quantum_width_; }
    int max_qubits() const { return max_qubits_; }
    void set_max_qubits(int max_qubits);
    const std::vector<RegisterEntry>& entries() const { return entries_; }

private:
    std::vector<RegisterEntry> entries_;
    int quantum_width_ = 0;
    int max_qubits_;
};

struct Amplitude {
    BasisIndex index;
    Complex value;
};
using SparseState = std::vector<Amplitude>;  // sorted by index, no zero entries
using Label = std::map<std::string, std::string>;

struct PureBranch {
    Label label;
    double weight = 1.0;
    SparseState amps;
};

struct CqEnsemble {
    RegisterLayout layout;
    std::vector<PureBranch> branches;

    double total_weight() const;
};

// Single branch, weight 1, all quantum registers in |0..0>.
CqEnsemble make_ensemble(RegisterLayout layout);

// Sorts, merges duplicate indices, drops zeros, fixes global phase and norm.
// Returns the squared norm before normalisation.
double canonicalize(SparseState& s);

CqEnsemble add_register(CqEnsemble ens, const std::string& name, RegKind kind, int width,
                        Side side = Side::server);
// Quantum register set to the given local state (index bit i = register qubit i).
CqEnsemble add_quantum_state(CqEnsemble ens, const std::string& name, int width,
                             const SparseState& local, Side side = Side::server);
// Traces a quantum register out (measure-and-forget), or drops a classical one.
// With a sampler the discarded value is drawn instead of branching.
CqEnsemble discard(CqEnsemble ens, const std::string& name, std::mt19937_64* sampler = nullptr);
// Tensor product; register names must be disjoint.
CqEnsemble tensor(const CqEnsemble& a, const CqEnsemble& b);

// Raw operator action on a sparse state; no normalisation.
SparseState apply_matrix(const SparseState& s, const std::vector<int>& qubits, const Matrix& op);

// qubits[0] is the most significant bit of the gate's local index.
CqEnsemble apply_unitary(CqEnsemble ens, const std::vector<int>& qubits, const Matrix& gate);

// Permutation of basis states (with optional phase) acting on each branch.
// The map must be injective on the branch support.
using BasisMap = std::function<std::pair<BasisIndex, Complex>(const Label&, BasisIndex)>;
CqEnsemble apply_basis_map(CqEnsemble ens, const BasisMap& map);

struct Basis {
    enum Kind { computational, hadamard, rotated } kind = computational;
    int phi = 0;  // multiple of pi/4, rotated only
    static Basis z() { return {computational, 0}; }
    static Basis x() { return {hadamard, 0}; }
    static Basis rot(int phi);
};

// With a sampler each branch keeps one drawn outcome (weights unchanged).
CqEnsemble measure_basis(CqEnsemble ens, const std::vector<int>& qubits, Basis basis,
                         const std::string& record_into, std::mt19937_64* sampler = nullptr);
CqEnsemble measure_bell(CqEnsemble ens, const std::vector<std::pair<int, int>>& pairs,
                        const std::string& record_into);
CqEnsemble measure_parity(CqEnsemble ens, const std::vector<int>& qubits,
                          const std::string& record_into, std::mt19937_64* sampler = nullptr);

// Keeps basis states satisfying keep; weights shrink by the kept squared norm.
using BasisPredicate = std::function<bool(const Label&, BasisIndex)>;
CqEnsemble project(CqEnsemble ens, const BasisPredicate& keep);
using LabelPredicate = std::function<bool(const Label&)>;
CqEnsemble select_branches(CqEnsemble ens, const LabelPredicate& keep);

// Picks one branch by weight and renormalises it to weight 1.
CqEnsemble sample_branch(CqEnsemble ens, std::mt19937_64& rng);

// Writes a classical value; fails if the register already holds a different value.
void write_label(PureBranch& b, const RegisterLayout& layout, const std::string& reg,
                 const std::string& value);

struct DensityView {
    Matrix matrix;
    std::vector<std::string> registers;
};

// Selected registers may be quantum or classical; classical bits become
// diagonal blocks. Bit order: registers in the given order, register bit 0 first.
DensityView density_of(const CqEnsemble& ens, const std::vector<std::string>& registers,
                       const LabelPredicate& condition = nullptr);

double trace_distance(const DensityView& a, const DensityView& b);
double trace_distance(const Matrix& a, const Matrix& b);

// Exact trace distance between two ensembles restricted to the visible registers,
// computed on the span of the branch vectors (no dense 2^n materialisation).
double trace_distance(const CqEnsemble& a, const CqEnsemble& b,
                      const std::vector<std::string>& visible);

// <t| rho_regs |t> summed over branches, where t is a local state on regs.
double overlap_probability(const CqEnsemble& ens, const std::vector<std::string>& regs,
                           const SparseState& target);

// Local index of `qubits` inside a global basis index (qubits[0] most significant).
BasisIndex gather_bits(BasisIndex index, const std::vector<int>& qubits);
BasisIndex scatter_bits(BasisIndex index, BasisIndex local, const std::vector<int>& qubits);

std::string bits_to_string(BasisIndex value, int width);  // char i = bit i
BasisIndex string_to_bits(const std::string& s);

// Register-local value of a quantum register (bit i = register qubit i).
BasisIndex register_value(const RegisterLayout& layout, const std::string& name, BasisIndex index);
BasisIndex with_register_value(const RegisterLayout& layout, const std::string& name,
                               BasisIndex index, BasisIndex value);

Complex phase_of(int eighths);  // e^{i pi k / 4}
SparseState plus_theta(int theta);
Matrix hadamard();
Matrix rotation_to(int phi);  // maps |+_phi> to |0>, |+_{phi+4}> to |1>
Matrix phase_gate(int eighths);

}  // namespace rspv::qsim
