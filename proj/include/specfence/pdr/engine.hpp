#pragma once

#include "specfence/encode/transition_system.hpp"
#include "specfence/logic/aig.hpp"
#include "specfence/logic/cube.hpp"
#include "specfence/logic/sat_solver.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace specfence::pdr
{

using encode::State;
using encode::Trace;
using encode::TransitionSystem;
using logic::Cube;

enum class Rule
{
    Safe,
    Cex,
    Unfold,
    Candidate,
    Predecessor,
    NewLemma,
    ReQueue,
    Push,
    MaxIndSubset,
    Successor,
    ResetQ,
    ResetReach,
};

std::string to_string( Rule r );

struct RuleEvent
{
    Rule rule;
    unsigned level;
    std::size_t cube_size;
};

enum class StepResult
{
    Continue,
    Safe,
    LeakFound,
};

class RequireViolated : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class NotSafeError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

class InternalError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

struct EngineOptions
{
    std::uint64_t seed = 0;
    // Per SAT call; zero means unlimited.
    std::uint64_t conflict_budget = 0;
    // Re-check the frame trace properties and Reach replay after every step.
    bool check_invariants = false;
    std::function< void( const RuleEvent& ) > log;
};

struct EngineStats
{
    std::uint64_t queries = 0;
    std::uint64_t steps = 0;
    std::uint64_t obligations = 0;
    std::uint64_t lemmas = 0;
};

struct RevalidationStats
{
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

// A lemma !cube held at a level; level 0 is unused and infinity is kept
// separately.
struct FrameView
{
    unsigned n = 0;
    // frames[j] holds the cubes whose lemma was established exactly at j.
    std::vector< std::vector< Cube > > frames;
    std::vector< Cube > infinity;
};

// IC3/PDR over the bit-blasted cone of influence of a transition system.
// The engine can be advanced one rule application at a time and, after a
// leak, reset and rebased onto a system with more fences.
class Engine
{
public:
    explicit Engine( const TransitionSystem& ts, EngineOptions options = {} );
    ~Engine();
    Engine( const Engine& ) = delete;
    Engine& operator=( const Engine& ) = delete;

    StepResult step();
    // Steps until Safe or LeakFound.
    StepResult run();

    [[nodiscard]] StepResult status() const { return _status; }

    // The execution behind the last leak, over the full system.
    [[nodiscard]] Trace reconstruct_execution() const;

    // Conjunction of the F-infinity lemmas over the full system's variables.
    [[nodiscard]] logic::Formula extract_invariant() const;
    // The F-infinity cubes over the full system's bit layout.
    [[nodiscard]] std::vector< Cube > invariant_cubes() const;

    [[nodiscard]] FrameView frames() const;
    [[nodiscard]] unsigned level() const { return _n; }
    [[nodiscard]] std::size_t queue_size() const;
    [[nodiscard]] std::size_t reach_size() const { return _reach.size(); }

    // Independent re-check of the four trace properties with a fresh solver.
    [[nodiscard]] std::optional< std::string > check_trace_properties() const;

    void reset_queue();
    void reset_reach();

    // Rebases the engine on a system that differs only in Init (an added
    // fence). Lemmas are re-admitted level by level against the new Init.
    RevalidationStats revalidate( const TransitionSystem& ts );

    [[nodiscard]] const EngineStats& stats() const { return _stats; }
    [[nodiscard]] const TransitionSystem& system() const { return _full; }
    [[nodiscard]] const encode::Reduction& reduction() const { return _red; }
    [[nodiscard]] const logic::BitLayout& layout() const { return _layout; }
    [[nodiscard]] std::string render( const Cube& c ) const;

private:
    struct Obligation
    {
        Cube cube;
        unsigned level;
        // Obligation this one was derived from; SIZE_MAX for a Bad cube.
        std::size_t parent;
        // Inputs taking any state of the cube into the parent's cube.
        std::vector< std::uint64_t > inputs;
    };

    struct ReachEntry
    {
        State state;
        // SIZE_MAX for an Init state.
        std::size_t parent;
        std::vector< std::uint64_t > inputs;
    };

    struct Leak
    {
        std::size_t obligation;
        // Reach entry inside the obligation's cube, or SIZE_MAX when the
        // cube meets Init.
        std::size_t reach;
    };

    class Context;

    TransitionSystem _full;
    encode::Reduction _red;
    EngineOptions _options;
    logic::BitLayout _layout;
    logic::BitLayout _input_layout;

    logic::Aig _aig;
    std::vector< logic::AigLit > _cur;
    std::vector< logic::AigLit > _inp;
    std::vector< logic::AigLit > _nxt;
    logic::AigLit _bad;

    std::unique_ptr< Context > _main;
    std::unique_ptr< Context > _lift;

    unsigned _n = 0;
    std::vector< std::vector< Cube > > _frames;
    std::vector< Cube > _infinity;
    bool _infinity_changed = true;

    std::vector< Obligation > _obligations;
    std::map< unsigned, std::deque< std::size_t > > _queue;
    std::vector< ReachEntry > _reach;
    std::optional< Leak > _leak;
    StepResult _status = StepResult::Continue;
    EngineStats _stats;

    void build_model();
    void rebuild_solvers();
    void emit( Rule r, unsigned level, std::size_t size ) const;

    std::vector< logic::sat::Lit > frame_assumptions( Context& ctx, unsigned j ) const;
    logic::sat::Result query( Context& ctx, std::vector< logic::sat::Lit > assumptions );

    [[nodiscard]] bool meets_init( const Cube& c ) const;
    [[nodiscard]] std::optional< std::size_t > meets_reach( const Cube& c ) const;
    // Adds back literals of `from` until c misses Init and the concrete Reach states.
    [[nodiscard]] Cube separate( Cube c, const Cube& from ) const;

    // Is !c inductive relative to F_j? On success returns the core of c.
    std::optional< Cube > relative_inductive( const Cube& c, unsigned j, bool strengthen );
    Cube generalize( const Cube& c, unsigned j );
    Cube lift_predecessor( const State& s, const std::vector< std::uint64_t >& in, const Cube* target );

    void add_lemma( const Cube& c, unsigned level );
    void add_infinity( const Cube& c );
    void push_lemmas();

    StepResult handle_obligation();
    StepResult check_safe();

    State model_state( Context& ctx ) const;
    std::vector< std::uint64_t > model_inputs( Context& ctx ) const;
    void add_reach( State s, std::size_t parent, std::vector< std::uint64_t > in );
    void verify_reach( std::size_t id ) const;
    void after_step();
};

} // namespace specfence::pdr
