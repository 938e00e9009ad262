#pragma once

#include "specfence/certificate/certificate.hpp"
#include "specfence/ir/program.hpp"
#include "specfence/repair/repair.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace specfence::cli
{

class UsageError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

encode::SpeculationMode parse_mode( const std::string& s );
encode::Placement parse_placement( const std::string& s );
threat::ThreatModel parse_threat( const std::string& s );
repair::Activation parse_activation( const std::string& s );
bool parse_switch( const std::string& s );
std::vector< std::string > parse_list( const std::string& s );

ir::Program load_program( const std::filesystem::path& path );

struct ProgramCounts
{
    std::size_t instructions = 0;
    std::size_t conditionals = 0;
    std::size_t memory = 0;
};

ProgramCounts count_instructions( const ir::Program& p );

// Minimizes the invariant and exports it.
std::string make_certificate( const encode::TransitionSystem& ts, const std::vector< logic::Cube >& invariant,
                              const std::string& program, threat::ThreatModel threat );

// Names a code point: L3, assert@L3, halt, bad.
std::string code_name( const encode::TransitionSystem& ts, std::uint64_t pc );
// One line per state with the pc, the spec value and a marker at the split point.
std::string render_trace( const encode::TransitionSystem& ts, const encode::Trace& t );
// Site id, source line and what the fence guards, one line per fence.
std::string fence_report( const ir::Program& p, const encode::TransitionSystem& ts,
                          const std::vector< std::string >& fences );

struct BenchConfig
{
    encode::Placement placement;
    repair::Activation activation;
    bool incremental;
    encode::SpeculationMode mode;
};

// The every-inst, split-point, non-incremental, unbounded baseline, then
// {after-branch, before-memory} x {incremental, non-incremental} x
// {unbounded, bounded:k}.
std::vector< BenchConfig > bench_configs( unsigned bound );

struct BenchOptions
{
    threat::ThreatModel threat = threat::ThreatModel::Strong;
    unsigned bound = 4;
    std::uint64_t seed = 0;
    double timeout = 0;
    // Certificates are written here when set.
    std::optional< std::filesystem::path > cert_dir;
};

struct BenchRow
{
    std::string benchmark;
    ProgramCounts counts;
    BenchConfig config;
    std::size_t fences = 0;
    double time_ms = 0;
    std::string verdict;
    std::size_t lemmas_kept = 0;
    std::size_t lemmas_dropped = 0;
    std::uint64_t queries = 0;
    std::vector< std::string > fence_list;
    std::string certificate;
    bool certificate_passed = false;
};

std::vector< std::filesystem::path > corpus_files( const std::filesystem::path& dir );
BenchRow bench_one( const std::filesystem::path& file, const BenchConfig& config, const BenchOptions& options );
std::vector< BenchRow > run_bench( const std::vector< std::filesystem::path >& files, const BenchOptions& options );

std::string certificate_name( const BenchRow& row );
std::string csv_header();
std::string csv_line( const BenchRow& row );

} // namespace specfence::cli
