#pragma once

#include "specfence/ir/program.hpp"
#include "specfence/logic/term.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace specfence::encode
{

using logic::Formula;
using logic::Term;

enum class VarKind
{
    Data,
    ArrayCell,
    Pc,
    Spec,
    Fence,
};

struct StateVar
{
    std::string name;
    VarKind kind;
    unsigned width;
};

// Free per-step choice: a branch direction under speculation or the value
// read by an out-of-bounds load.
struct InputVar
{
    std::string name;
    unsigned width;
};

struct GuardedUpdate
{
    Formula guard;
    // Next-state values of the listed state variables; every other variable
    // keeps its value.
    std::vector< std::pair< std::size_t, Term > > updates;
    std::string origin;
};

enum class FencePosition
{
    Before,
    AfterBranchThen,
    AfterBranchElse,
};

struct FenceSite
{
    std::string id;
    ir::Label anchor;
    FencePosition position;
    // The branch instruction of an after-branch site.
    std::optional< ir::Label > branch;
};

struct SpeculationMode
{
    // Unset: unbounded speculation.
    std::optional< unsigned > bound;

    static SpeculationMode unbounded() { return {}; }
    static SpeculationMode bounded( unsigned k ) { return { k }; }
    [[nodiscard]] bool is_bounded() const { return bound.has_value(); }
    friend bool operator==( const SpeculationMode&, const SpeculationMode& ) = default;
};

std::string to_string( const SpeculationMode& m );

enum class CodeKind
{
    Instruction,
    Halt,
    Assertion,
    Bottom,
};

struct CodePoint
{
    CodeKind kind;
    ir::Label label;
    std::uint64_t code;
};

using State = std::vector< std::uint64_t >;

struct Trace
{
    std::vector< State > states;
    // inputs[j] drives the step from states[j] to states[j + 1].
    std::vector< std::vector< std::uint64_t > > inputs;

    [[nodiscard]] std::size_t size() const { return states.size(); }
};

class CapacityError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class AlreadyActiveError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A symbolic transition system. Term variable indices are: state variable i
// at i, input j at S + j and the primed copy of state variable i at S + I + i,
// where S and I count state and input variables.
class TransitionSystem
{
public:
    std::string name;
    std::vector< StateVar > state_vars;
    std::vector< InputVar > inputs;
    // Values fixed by Init; the remaining variables start unconstrained.
    std::vector< std::optional< std::uint64_t > > init_values;
    std::vector< GuardedUpdate > updates;
    // Functional form of Tr: next[i] is the value of state variable i after
    // one step, over current-state and input variables.
    std::vector< Term > next;
    Formula bad;

    // Metadata for speculative systems.
    std::vector< CodePoint > pc_codes;
    std::optional< std::size_t > pc_var;
    std::optional< std::size_t > spec_var;
    std::vector< FenceSite > fence_sites;
    std::map< std::string, std::size_t > fence_vars;
    std::optional< SpeculationMode > mode;
    std::set< ir::Label > vinst;

    void declare_terms();

    [[nodiscard]] std::size_t num_state() const { return state_vars.size(); }
    [[nodiscard]] std::size_t num_inputs() const { return inputs.size(); }
    [[nodiscard]] std::size_t num_vars() const { return 2 * state_vars.size() + inputs.size(); }
    [[nodiscard]] std::size_t input_index( std::size_t j ) const { return state_vars.size() + j; }
    [[nodiscard]] std::size_t next_index( std::size_t i ) const { return state_vars.size() + inputs.size() + i; }

    [[nodiscard]] const Term& state_term( std::size_t i ) const { return _state_terms.at( i ); }
    [[nodiscard]] const Term& input_term( std::size_t j ) const { return _input_terms.at( j ); }
    [[nodiscard]] const Term& next_term( std::size_t i ) const { return _next_terms.at( i ); }

    [[nodiscard]] std::optional< std::size_t > find_state( const std::string& n ) const;
    [[nodiscard]] std::optional< std::size_t > find_input( const std::string& n ) const;

    [[nodiscard]] Formula init() const;
    // Tr(X, I, X') as a conjunction of next-state equations.
    [[nodiscard]] Formula trans() const;
    // Disjunction of the guards; valid when the guarded form is total.
    [[nodiscard]] Formula guard_cover() const;
    // Rewrites a formula over current-state variables to the primed copies.
    [[nodiscard]] Formula prime( const Formula& f ) const;

    [[nodiscard]] std::size_t state_bits() const;

    [[nodiscard]] bool satisfies_init( const State& s ) const;
    [[nodiscard]] bool is_bad( const State& s ) const;
    [[nodiscard]] State step( const State& s, const std::vector< std::uint64_t >& in ) const;
    // Does the given input take s to t?
    [[nodiscard]] bool check_step( const State& s, const std::vector< std::uint64_t >& in, const State& t ) const;

    // Validates a trace: initial, consecutive steps, last state bad.
    [[nodiscard]] std::optional< std::string > validate_trace( const Trace& t, bool require_bad = true ) const;

    [[nodiscard]] std::uint64_t pc_code( CodeKind kind, ir::Label label ) const;
    [[nodiscard]] std::optional< CodePoint > decode_pc( std::uint64_t code ) const;
    [[nodiscard]] std::uint64_t bottom_code() const;

    [[nodiscard]] std::string describe_state( const State& s ) const;

private:
    std::vector< Term > _state_terms;
    std::vector< Term > _input_terms;
    std::vector< Term > _next_terms;
};

struct EncodeOptions
{
    std::size_t max_state_bits = 4096;
};

TransitionSystem encode_standard( const ir::Program& p, const EncodeOptions& options = {} );

enum class Placement
{
    EveryInst,
    AfterBranch,
    BeforeMemory,
};

std::string to_string( Placement p );

std::vector< FenceSite > fence_sites( const ir::Program& p, const std::set< ir::Label >& vinst, Placement placement );

TransitionSystem encode_speculative( const ir::Program& p, const std::set< ir::Label >& vinst,
                                     const std::vector< FenceSite >& sites, SpeculationMode mode,
                                     const std::set< std::string >& active, const EncodeOptions& options = {} );

TransitionSystem add_fence( const TransitionSystem& ts, const std::string& site_id );

std::set< std::string > active_fences( const TransitionSystem& ts );

// Cone of influence of Bad: the smallest set of state variables closed under
// the dependencies of their next-state functions.
struct Reduction
{
    TransitionSystem reduced;
    // reduced state variable -> original state variable, same for inputs.
    std::vector< std::size_t > state_map;
    std::vector< std::size_t > input_map;

    [[nodiscard]] State project( const State& full ) const;
    // Runs a reduced trace on the original system. Variables outside the
    // cone start at their Init value or zero.
    [[nodiscard]] Trace lift( const TransitionSystem& original, const Trace& t ) const;
    // Rewrites a formula over reduced current-state variables to the
    // original indices.
    [[nodiscard]] Formula lift_formula( const TransitionSystem& original, const Formula& f ) const;
};

Reduction cone_of_influence( const TransitionSystem& ts );

} // namespace specfence::encode
