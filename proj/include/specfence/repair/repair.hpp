#pragma once

#include "specfence/encode/transition_system.hpp"
#include "specfence/ir/program.hpp"
#include "specfence/logic/cube.hpp"
#include "specfence/pdr/engine.hpp"
#include "specfence/threat/threat.hpp"

#include <cstdint>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace specfence::repair
{

using encode::Placement;
using encode::SpeculationMode;
using encode::Trace;
using encode::TransitionSystem;

enum class Activation
{
    Nearest,
    SplitPoint,
};

std::string to_string( Activation a );

struct RepairOptions
{
    Placement placement = Placement::AfterBranch;
    Activation activation = Activation::Nearest;
    bool incremental = true;
    SpeculationMode mode = SpeculationMode::unbounded();
    threat::ThreatModel threat = threat::ThreatModel::Strong;
    bool loads_only = false;
    std::uint64_t seed = 0;
    // Fences active before the first iteration.
    std::set< std::string > initial_fences;
    // Wall-clock limit in seconds; zero means none.
    double timeout = 0;
    bool check_invariants = false;
    std::function< void( const pdr::RuleEvent& ) > log;
};

struct IterationStats
{
    // Fences active while the leak was found.
    std::set< std::string > active;
    std::string fence;
    Trace trace;
    std::size_t split_point = 0;
    std::uint64_t queries = 0;
    std::size_t lemmas_kept = 0;
    std::size_t lemmas_dropped = 0;
    double time_ms = 0;
};

struct RepairResult
{
    // Activated fences in order.
    std::vector< std::string > fences;
    TransitionSystem system;
    logic::Formula invariant;
    // The invariant as cubes over the full system's state bits.
    std::vector< logic::Cube > invariant_cubes;
    std::vector< IterationStats > iterations;
    std::size_t available_sites = 0;
    std::uint64_t queries = 0;
    std::size_t lemmas_kept = 0;
    std::size_t lemmas_dropped = 0;
    double time_ms = 0;
};

class MalformedTrace : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

class NoSiteCoversLeak : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

class TimeoutError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// The unique index k with spec = 0 at k - 1 and spec > 0 at k.
std::size_t speculative_split_point( const TransitionSystem& ts, const Trace& t );

// A fence site on the speculating suffix of a leaking execution:
// Nearest takes the occurrence closest to Bad, SplitPoint the first one.
std::string choose_fence( const TransitionSystem& ts, const Trace& t, Activation activation );

// Fence sites whose activation would stop the trace, in trace order.
std::vector< std::string > covering_sites( const TransitionSystem& ts, const Trace& t );

// Builds the speculative system of a program for the options.
TransitionSystem speculative_system( const ir::Program& p, const RepairOptions& options );

RepairResult repair( const ir::Program& p, const RepairOptions& options );
RepairResult repair_system( const TransitionSystem& ts, const RepairOptions& options );

} // namespace specfence::repair
