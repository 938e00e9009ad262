#include "specfence/cli/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace specfence::cli
{

using encode::CodeKind;
using encode::FencePosition;
using encode::Placement;
using encode::SpeculationMode;

encode::SpeculationMode parse_mode( const std::string& s )
{
    if ( s == "unbounded" )
        return SpeculationMode::unbounded();
    if ( s.rfind( "bounded:", 0 ) == 0 )
    {
        const std::string k = s.substr( 8 );
        if ( !k.empty() && k.size() <= 6 && std::all_of( k.begin(), k.end(), ::isdigit ) && std::stoul( k ) > 0 )
            return SpeculationMode::bounded( static_cast< unsigned >( std::stoul( k ) ) );
    }
    throw UsageError( "mode must be 'unbounded' or 'bounded:<k>' with k > 0, got '" + s + "'" );
}

encode::Placement parse_placement( const std::string& s )
{
    for ( auto p : { Placement::EveryInst, Placement::AfterBranch, Placement::BeforeMemory } )
        if ( encode::to_string( p ) == s )
            return p;
    throw UsageError( "placement must be every-inst, after-branch or before-memory, got '" + s + "'" );
}

threat::ThreatModel parse_threat( const std::string& s )
{
    if ( s == "strong" )
        return threat::ThreatModel::Strong;
    if ( s == "classical" )
        return threat::ThreatModel::Classical;
    throw UsageError( "threat must be strong or classical, got '" + s + "'" );
}

repair::Activation parse_activation( const std::string& s )
{
    if ( s == "nearest" )
        return repair::Activation::Nearest;
    if ( s == "split-point" )
        return repair::Activation::SplitPoint;
    throw UsageError( "activation must be nearest or split-point, got '" + s + "'" );
}

bool parse_switch( const std::string& s )
{
    if ( s == "on" )
        return true;
    if ( s == "off" )
        return false;
    throw UsageError( "expected on or off, got '" + s + "'" );
}

std::vector< std::string > parse_list( const std::string& s )
{
    std::vector< std::string > out;
    std::stringstream in( s );
    for ( std::string item; std::getline( in, item, ',' ); )
        if ( !item.empty() )
            out.push_back( item );
    return out;
}

ir::Program load_program( const std::filesystem::path& path )
{
    std::ifstream in( path );
    if ( !in )
        throw UsageError( "cannot read " + path.string() );
    std::ostringstream os;
    os << in.rdbuf();
    return ir::parse_program( os.str() );
}

ProgramCounts count_instructions( const ir::Program& p )
{
    return { p.insts.size(), ir::conditional_instructions( p ).size(), ir::memory_instructions( p ).size() };
}

std::string make_certificate( const encode::TransitionSystem& ts, const std::vector< logic::Cube >& invariant,
                              const std::string& program, threat::ThreatModel threat )
{
    return certificate::export_certificate( ts, certificate::minimize_invariant( ts, invariant ),
                                            { program, threat::to_string( threat ) } );
}

std::string code_name( const encode::TransitionSystem& ts, std::uint64_t pc )
{
    const auto cp = ts.decode_pc( pc );
    if ( !cp )
        return "pc=" + std::to_string( pc );
    switch ( cp->kind )
    {
    case CodeKind::Instruction: return ir::label_name( cp->label );
    case CodeKind::Assertion: return "assert@" + ir::label_name( cp->label );
    case CodeKind::Halt: return "halt";
    case CodeKind::Bottom: return "bad";
    }
    return "?";
}

std::string render_trace( const encode::TransitionSystem& ts, const encode::Trace& t )
{
    std::optional< std::size_t > split;
    try
    {
        split = repair::speculative_split_point( ts, t );
    }
    catch ( const repair::MalformedTrace& )
    {
    }
    std::ostringstream os;
    for ( std::size_t j = 0; j < t.states.size(); ++j )
    {
        os << "  " << j << ": " << code_name( ts, t.states[ j ][ *ts.pc_var ] );
        if ( ts.spec_var )
            os << "  spec=" << t.states[ j ][ *ts.spec_var ];
        if ( split && *split == j )
            os << "  <- speculation starts";
        os << "\n";
    }
    return os.str();
}

std::string fence_report( const ir::Program& p, const encode::TransitionSystem& ts,
                          const std::vector< std::string >& fences )
{
    std::ostringstream os;
    for ( const auto& id : fences )
    {
        const auto site = std::find_if( ts.fence_sites.begin(), ts.fence_sites.end(),
                                        [ & ]( const encode::FenceSite& s ) { return s.id == id; } );
        if ( site == ts.fence_sites.end() )
            continue;
        const ir::Label at = site->branch.value_or( site->anchor );
        os << "  " << id << "  line " << p.line_of( at ) << ": ";
        if ( site->position == FencePosition::Before )
            os << "before " << ir::print_instruction( p.insts[ at ] );
        else
            os << ( site->position == FencePosition::AfterBranchThen ? "then" : "else" ) << "-side of "
               << ir::print_instruction( p.insts[ at ] );
        os << "\n";
    }
    return os.str();
}

std::vector< BenchConfig > bench_configs( unsigned bound )
{
    std::vector< BenchConfig > out{
            { Placement::EveryInst, repair::Activation::SplitPoint, false, SpeculationMode::unbounded() } };
    for ( auto placement : { Placement::AfterBranch, Placement::BeforeMemory } )
        for ( bool incremental : { true, false } )
            for ( auto mode : { SpeculationMode::unbounded(), SpeculationMode::bounded( bound ) } )
                out.push_back( { placement, repair::Activation::Nearest, incremental, mode } );
    return out;
}

std::vector< std::filesystem::path > corpus_files( const std::filesystem::path& dir )
{
    std::vector< std::filesystem::path > out;
    for ( const auto& e : std::filesystem::directory_iterator( dir ) )
        if ( e.is_regular_file() && e.path().extension() == ".sir" )
            out.push_back( e.path() );
    std::sort( out.begin(), out.end() );
    return out;
}

BenchRow bench_one( const std::filesystem::path& file, const BenchConfig& config, const BenchOptions& options )
{
    const auto p = load_program( file );
    BenchRow row;
    row.benchmark = file.stem().string();
    row.counts = count_instructions( p );
    row.config = config;

    repair::RepairOptions o;
    o.placement = config.placement;
    o.activation = config.activation;
    o.incremental = config.incremental;
    o.mode = config.mode;
    o.threat = options.threat;
    o.seed = options.seed;
    o.timeout = options.timeout;
    const auto t0 = std::chrono::steady_clock::now();
    try
    {
        const auto r = repair::repair( p, o );
        row.fences = r.fences.size();
        row.fence_list = r.fences;
        row.lemmas_kept = r.lemmas_kept;
        row.lemmas_dropped = r.lemmas_dropped;
        row.queries = r.queries;
        row.verdict = r.fences.empty() ? "SAFE-unmodified" : "SAFE-after-repair";
        row.certificate = make_certificate( r.system, r.invariant_cubes, p.name, options.threat );
        row.certificate_passed = certificate::check_certificate( row.certificate ).pass;
    }
    catch ( const repair::TimeoutError& )
    {
        row.verdict = "TIMEOUT";
    }
    row.time_ms = std::chrono::duration< double, std::milli >( std::chrono::steady_clock::now() - t0 ).count();
    if ( options.cert_dir && !row.certificate.empty() )
    {
        std::filesystem::create_directories( *options.cert_dir );
        std::ofstream( *options.cert_dir / certificate_name( row ) ) << row.certificate;
    }
    return row;
}

std::vector< BenchRow > run_bench( const std::vector< std::filesystem::path >& files, const BenchOptions& options )
{
    std::vector< BenchRow > rows;
    for ( const auto& f : files )
        for ( const auto& c : bench_configs( options.bound ) )
            rows.push_back( bench_one( f, c, options ) );
    return rows;
}

std::string certificate_name( const BenchRow& row )
{
    std::string mode = encode::to_string( row.config.mode );
    std::replace( mode.begin(), mode.end(), ':', '-' );
    return row.benchmark + "." + encode::to_string( row.config.placement ) + "." + repair::to_string( row.config.activation ) +
           "." + ( row.config.incremental ? "inc" : "noninc" ) + "." + mode + ".cert.smt2";
}

std::string csv_header()
{
    return "benchmark,ni,nb,nm,placement,incremental,mode,nf,time_ms,verdict,lemmas_kept,lemmas_dropped";
}

std::string csv_line( const BenchRow& row )
{
    char time[ 32 ];
    std::snprintf( time, sizeof time, "%.1f", row.time_ms );
    std::ostringstream os;
    os << row.benchmark << "," << row.counts.instructions << "," << row.counts.conditionals << "," << row.counts.memory
       << "," << encode::to_string( row.config.placement ) << "," << ( row.config.incremental ? "on" : "off" ) << ","
       << encode::to_string( row.config.mode ) << "," << row.fences << "," << time << "," << row.verdict << ","
       << row.lemmas_kept << "," << row.lemmas_dropped;
    return os.str();
}

} // namespace specfence::cli
