// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "test_support.hpp"

#include "specfence/certificate/certificate.hpp"
#include "specfence/cli/driver.hpp"
#include "specfence/logic/explicit.hpp"
#include "specfence/pdr/engine.hpp"
#include "specfence/repair/repair.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <unistd.h>

using namespace specfence;
using encode::CodeKind;
using encode::Placement;
using encode::SpeculationMode;
using encode::State;
using encode::TransitionSystem;
using logic::ExplicitVerdict;
namespace fs = std::filesystem;

namespace
{

constexpr int min_cases = 1000;
constexpr double fig1_seconds = 5.0;
constexpr double sweep_seconds = 300.0;
constexpr double mutation_rate = 0.95;
constexpr std::size_t oracle_budget = std::size_t{ 1 } << 20;

struct Outcome
{
    bool pass = true;
    std::string detail;
};

double seconds_since( std::chrono::steady_clock::time_point t0 )
{
    return std::chrono::duration< double >( std::chrono::steady_clock::now() - t0 ).count();
}

std::string fmt( double v, int digits = 2 )
{
    char buf[ 64 ];
    std::snprintf( buf, sizeof buf, "%.*f", digits, v );
    return buf;
}

std::string join( const std::vector< std::string >& xs )
{
    std::string out;
    for ( const auto& x : xs )
        out += ( out.empty() ? "" : "," ) + x;
    return "[" + out + "]";
}

std::vector< fs::path > kocher_files() { return cli::corpus_files( support::corpus_path( "kocher" ) ); }

repair::RepairOptions options_of( const cli::BenchConfig& c, threat::ThreatModel threat = threat::ThreatModel::Strong )
{
    repair::RepairOptions o;
    o.placement = c.placement;
    o.activation = c.activation;
    o.incremental = c.incremental;
    o.mode = c.mode;
    o.threat = threat;
    return o;
}

std::string config_name( const cli::BenchConfig& c )
{
    return encode::to_string( c.placement ) + "/" + repair::to_string( c.activation ) + "/" +
           ( c.incremental ? "inc" : "noninc" ) + "/" + encode::to_string( c.mode );
}

bool pdr_finds_leak( const TransitionSystem& ts )
{
    pdr::Engine engine( ts );
    return engine.run() == pdr::StepResult::LeakFound;
}

// The bench sweep shared by criteria 3, 5 and 9.
struct Sweep
{
    std::vector< cli::BenchRow > rows;
    double seconds = 0;
};

const Sweep& sweep()
{
    static const Sweep s = [] {
        Sweep out;
        const auto t0 = std::chrono::steady_clock::now();
        out.rows = cli::run_bench( kocher_files(), cli::BenchOptions{} );
        out.seconds = seconds_since( t0 );
        return out;
    }();
    return s;
}

Outcome fig1( Placement placement, const std::vector< std::string >& expected )
{
    repair::RepairOptions o;
    o.threat = threat::ThreatModel::Classical;
    o.placement = placement;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = repair::repair( support::load_corpus( "fig1.sir" ), o );
    const double t = seconds_since( t0 );
    Outcome out;
    out.pass = r.fences == expected && t < fig1_seconds;
    out.detail = "fences " + join( r.fences ) + ", expected " + join( expected ) + ", " + fmt( t, 3 ) + " s";
    return out;
}

Outcome corpus_sweep()
{
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t unsafe = 0, programs = 0;
    for ( const auto& f : kocher_files() )
    {
        ++programs;
        repair::RepairOptions o;
        if ( pdr_finds_leak( repair::speculative_system( cli::load_program( f ), o ) ) )
            ++unsafe;
        else
            out.detail += " verify-safe:" + f.stem().string();
    }
    const double verify_seconds = seconds_since( t0 );
    const auto& s = sweep();
    std::size_t safe = 0, passed = 0;
    for ( const auto& r : s.rows )
    {
        if ( r.verdict.rfind( "SAFE", 0 ) == 0 )
            ++safe;
        else
            out.detail += " " + r.benchmark + ":" + r.verdict;
        if ( r.certificate_passed && certificate::check_certificate( r.certificate ).pass )
            ++passed;
    }
    const double total = verify_seconds + s.seconds;
    out.pass = programs == 15 && unsafe == programs && s.rows.size() == programs * 9 && safe == s.rows.size() &&
               passed == s.rows.size() && total < sweep_seconds;
    out.detail = std::to_string( unsafe ) + "/" + std::to_string( programs ) + " unsafe before repair, " +
                 std::to_string( safe ) + "/" + std::to_string( s.rows.size() ) + " rows safe, " + std::to_string( passed ) +
                 " certificates pass, " + fmt( total ) + " s" + out.detail;
    return out;
}

// Repairs every corpus program under every configuration; the results feed
// criteria 4 and 8.
struct RepairRun
{
    std::string program;
    std::string config;
    ir::Program source;
    repair::RepairOptions options;
    repair::RepairResult result;
};

const std::vector< RepairRun >& corpus_repairs()
{
    static const std::vector< RepairRun > runs = [] {
        std::vector< RepairRun > out;
        for ( const auto& f : kocher_files() )
            for ( const auto& c : cli::bench_configs( 4 ) )
            {
                RepairRun r{ f.stem().string(), config_name( c ), cli::load_program( f ), options_of( c ), {} };
                r.result = repair::repair( r.source, r.options );
                out.push_back( std::move( r ) );
            }
        return out;
    }();
    return runs;
}

Outcome oracle_equivalence()
{
    Outcome out;
    std::size_t compared = 0, skipped = 0, agree = 0;
    logic::ExplicitOptions eo;
    eo.state_budget = oracle_budget;
    for ( const auto& run : corpus_repairs() )
    {
        // Every fence set the loop saw: the leaking ones, then the final one.
        std::vector< std::pair< std::set< std::string >, bool > > checks;
        for ( const auto& it : run.result.iterations )
            checks.emplace_back( it.active, true );
        checks.emplace_back( encode::active_fences( run.result.system ), false );
        for ( const auto& [ active, pdr_unsafe ] : checks )
        {
            auto o = run.options;
            o.initial_fences = active;
            const auto ts = repair::speculative_system( run.source, o );
            const auto e = logic::explicit_reachable( ts, eo );
            if ( e.verdict == ExplicitVerdict::BudgetExceeded )
            {
                ++skipped;
                continue;
            }
            ++compared;
            if ( ( e.verdict == ExplicitVerdict::Unsafe ) == pdr_unsafe )
                ++agree;
            else
                out.detail += " " + run.program + "@" + run.config + join( { active.begin(), active.end() } );
        }
    }
    out.pass = compared > 0 && agree == compared;
    out.detail = std::to_string( agree ) + "/" + std::to_string( compared ) + " verdicts agree, " +
                 std::to_string( skipped ) + " over the state budget" + out.detail;
    return out;
}

Outcome dominance()
{
    Outcome out;
    std::map< std::string, std::size_t > after;
    const auto key = []( const cli::BenchRow& r ) {
        return r.benchmark + "/" + ( r.config.incremental ? "inc" : "noninc" ) + "/" + encode::to_string( r.config.mode );
    };
    for ( const auto& r : sweep().rows )
        if ( r.config.placement == Placement::AfterBranch )
            after[ key( r ) ] = r.fences;
    std::size_t rows = 0, held = 0;
    for ( const auto& r : sweep().rows )
        if ( r.config.placement == Placement::BeforeMemory )
        {
            ++rows;
            const auto it = after.find( key( r ) );
            if ( it != after.end() && r.fences <= it->second )
                ++held;
            else
                out.detail += " " + key( r );
        }
    out.pass = rows > 0 && held == rows;
    out.detail = std::to_string( held ) + "/" + std::to_string( rows ) + " rows with before-memory <= after-branch" + out.detail;
    return out;
}

Outcome bounded_window()
{
    Outcome out;
    for ( unsigned k : { 1u, 2u, 4u } )
    {
        const auto p = support::load_corpus( "window/window" + std::to_string( k ) + ".sir" );
        repair::RepairOptions bounded;
        bounded.mode = SpeculationMode::bounded( k );
        const auto r = repair::repair( p, bounded );
        const auto bounded_oracle = logic::explicit_reachable( repair::speculative_system( p, bounded ) ).verdict;
        repair::RepairOptions unbounded;
        const auto ts = repair::speculative_system( p, unbounded );
        const bool leak = pdr_finds_leak( ts );
        const auto unbounded_oracle = logic::explicit_reachable( ts ).verdict;
        const bool ok = r.fences.empty() && bounded_oracle == ExplicitVerdict::Safe && leak &&
                        unbounded_oracle == ExplicitVerdict::Unsafe;
        out.pass = out.pass && ok;
        out.detail += ( out.detail.empty() ? "" : "; " ) + std::string( "k=" ) + std::to_string( k ) + " bounded " +
                      ( r.fences.empty() ? "SAFE" : "fenced" ) + " unbounded " + ( leak ? "UNSAFE" : "SAFE" ) +
                      ( ok ? "" : " (mismatch)" );
    }
    return out;
}

// Replays the standard system and the speculative one side by side.
// Correct predictions keep spec at zero; assertion nodes are stutter steps.
struct Projection
{
    std::vector< std::pair< std::size_t, std::size_t > > vars;
};

std::pair< CodeKind, ir::Label > code_of( const TransitionSystem& ts, const State& s )
{
    const auto cp = ts.decode_pc( s[ *ts.pc_var ] );
    return { cp->kind, cp->kind == CodeKind::Bottom ? 0 : cp->label };
}

State random_init( const TransitionSystem& ts, std::mt19937_64& rng )
{
    State s( ts.num_state() );
    for ( std::size_t i = 0; i < s.size(); ++i )
    {
        const unsigned w = ts.state_vars[ i ].width;
        s[ i ] = ts.init_values[ i ].value_or( rng() & ( w >= 64 ? ~0ULL : ( 1ULL << w ) - 1 ) );
    }
    return s;
}

std::vector< std::uint64_t > random_inputs( const TransitionSystem& ts, std::mt19937_64& rng )
{
    std::vector< std::uint64_t > in;
    for ( const auto& v : ts.inputs )
        in.push_back( rng() & ( v.width >= 64 ? ~0ULL : ( 1ULL << v.width ) - 1 ) );
    return in;
}

std::optional< std::string > standard_in_speculative( const TransitionSystem& m, const TransitionSystem& hat,
                                                      std::mt19937_64& rng, unsigned steps )
{
    State s = random_init( m, rng );
    State h( hat.num_state() );
    for ( std::size_t i = 0; i < hat.num_state(); ++i )
        h[ i ] = hat.init_values[ i ] ? *hat.init_values[ i ] : s[ *m.find_state( hat.state_vars[ i ].name ) ];
    for ( unsigned j = 0; j < steps; ++j )
    {
        for ( int guard = 0; code_of( hat, h ).first == CodeKind::Assertion; ++guard )
        {
            if ( guard > 1 )
                return "assertion node does not advance";
            h = hat.step( h, std::vector< std::uint64_t >( hat.num_inputs(), 0 ) );
        }
        if ( code_of( hat, h ) != code_of( m, s ) )
            return "pc differs at step " + std::to_string( j );
        for ( std::size_t i = 0; i < m.num_state(); ++i )
            if ( i != *m.pc_var && s[ i ] != h[ *hat.find_state( m.state_vars[ i ].name ) ] )
                return m.state_vars[ i ].name + " differs at step " + std::to_string( j );
        if ( code_of( m, s ).first != CodeKind::Instruction )
            return std::nullopt;
        const auto in = random_inputs( m, rng );
        const State s2 = m.step( s, in );
        std::optional< State > next;
        for ( std::uint64_t choice : { 0u, 1u } )
        {
            std::vector< std::uint64_t > hin( hat.num_inputs(), choice );
            for ( std::size_t k = 0; k < m.num_inputs(); ++k )
                hin[ *hat.find_input( m.inputs[ k ].name ) ] = in[ k ];
            // A fenced wrong prediction stutters with spec still zero.
            const State h2 = hat.step( h, hin );
            if ( h2[ *hat.spec_var ] == 0 && ( !next || *next == h ) )
                next = h2;
        }
        if ( !next )
            return "no prediction keeps spec at zero at step " + std::to_string( j );
        if ( *next == h && s2 != s )
            return "speculative system stutters without speculation at step " + std::to_string( j );
        s = s2;
        h = *next;
    }
    return std::nullopt;
}

std::optional< std::string > fenced_in_unfenced( const TransitionSystem& fenced, const TransitionSystem& bare,
                                                 std::mt19937_64& rng, unsigned steps )
{
    State f = random_init( fenced, rng );
    State b = f;
    std::set< std::size_t > fence_vars;
    for ( const auto& [ id, v ] : bare.fence_vars )
    {
        b[ v ] = *bare.init_values[ v ];
        fence_vars.insert( v );
    }
    for ( unsigned j = 0; j < steps; ++j )
    {
        const auto in = random_inputs( fenced, rng );
        const State f2 = fenced.step( f, in );
        if ( f2 == f )
            continue;
        b = bare.step( b, in );
        f = f2;
        for ( std::size_t i = 0; i < f.size(); ++i )
            if ( !fence_vars.contains( i ) && f[ i ] != b[ i ] )
                return fenced.state_vars[ i ].name + " differs at step " + std::to_string( j );
    }
    return std::nullopt;
}

Outcome lemma_suite()
{
    support::ProgramGenerator gen( 2024 );
    gen.asserts = false;
    std::mt19937_64 rng( 7 );
    std::size_t repairs = 0, traces = 0, kills = 0, containment = 0;
    std::vector< std::string > violations;
    auto violation = [ & ]( const std::string& what, const ir::Program& p ) {
        if ( violations.size() < 5 )
            violations.push_back( what + " in\n" + ir::print_program( p ) );
        else
            violations.push_back( what );
    };

    while ( repairs < min_cases || traces < min_cases || kills < min_cases || containment < min_cases )
    {
        const auto p = gen.program( 3 + gen.pick( 6 ) );
        repair::RepairOptions o;
        o.placement = static_cast< Placement >( gen.pick( 3 ) );
        o.activation = gen.pick( 2 ) == 0 ? repair::Activation::Nearest : repair::Activation::SplitPoint;
        o.incremental = gen.pick( 2 ) == 0;
        o.threat = gen.pick( 2 ) == 0 ? threat::ThreatModel::Strong : threat::ThreatModel::Classical;
        if ( gen.pick( 2 ) == 0 )
            o.mode = SpeculationMode::bounded( 1 + gen.pick( 4 ) );

        const auto r = repair::repair( p, o );
        ++repairs;
        if ( r.iterations.size() > r.available_sites )
            violation( "iterations exceed sites", p );

        for ( const auto& it : r.iterations )
        {
            auto before = o;
            before.initial_fences = it.active;
            const auto ts = repair::speculative_system( p, before );
            ++traces;
            if ( const auto err = ts.validate_trace( it.trace ) )
                violation( "trace is not a leaking execution: " + *err, p );
            // spec never decreases and leaves zero exactly once.
            std::size_t flips = 0;
            for ( std::size_t j = 1; j < it.trace.size(); ++j )
            {
                const auto a = it.trace.states[ j - 1 ][ *ts.spec_var ];
                const auto b = it.trace.states[ j ][ *ts.spec_var ];
                if ( b < a )
                    violation( "spec decreases", p );
                if ( a == 0 && b > 0 )
                    ++flips;
            }
            if ( flips != 1 || it.trace.states.back()[ *ts.spec_var ] == 0 )
                violation( "trace does not flip exactly once", p );

            // The same inputs from the same start no longer reach Bad.
            auto after = before;
            after.initial_fences.insert( it.fence );
            const auto fenced = repair::speculative_system( p, after );
            State s = it.trace.states.front();
            for ( const auto& [ id, v ] : fenced.fence_vars )
                s[ v ] = *fenced.init_values[ v ];
            bool reached = fenced.is_bad( s );
            for ( const auto& in : it.trace.inputs )
            {
                s = fenced.step( s, in );
                reached = reached || fenced.is_bad( s );
            }
            ++kills;
            if ( reached )
                violation( "fence " + it.fence + " does not kill its trace", p );
        }

        // The standard run within the fenced system, the fenced run within the unfenced one.
        const auto m = encode::encode_standard( p );
        auto bare_options = o;
        const auto bare = repair::speculative_system( p, bare_options );
        auto some = o;
        for ( const auto& s : bare.fence_sites )
            if ( rng() % 2 == 0 )
                some.initial_fences.insert( s.id );
        const auto fenced = repair::speculative_system( p, some );
        if ( const auto err = standard_in_speculative( m, fenced, rng, 40 ) )
            violation( "standard run not in fenced system: " + *err, p );
        if ( const auto err = fenced_in_unfenced( fenced, bare, rng, 40 ) )
            violation( "fenced run not in unfenced system: " + *err, p );
        ++containment;
    }

    Outcome out;
    out.pass = violations.empty();
    out.detail = std::to_string( traces ) + " traces (monotone spec, single flip), " + std::to_string( kills ) +
                 " fence activations killing their trace, " + std::to_string( containment ) +
                 " containment replays, " + std::to_string( repairs ) + " repairs within the site bound; " +
                 std::to_string( violations.size() ) + " violations";
    for ( std::size_t i = 0; i < violations.size() && i < 5; ++i )
        out.detail += "\n    " + violations[ i ];
    return out;
}

Outcome mutation_testing()
{
    std::size_t certificates = 0, mutants = 0, detected = 0;
    std::set< std::string > seen;
    std::vector< std::string > survivors;
    for ( const auto& run : corpus_repairs() )
    {
        const auto& ts = run.result.system;
        const auto inv = certificate::minimize_invariant( ts, run.result.invariant_cubes );
        const certificate::CertificateInfo info{ run.program, threat::to_string( run.options.threat ) };
        if ( !seen.insert( certificate::export_certificate( ts, inv, info ) ).second )
            continue;
        ++certificates;
        const auto layout = logic::layout_of( ts );
        std::vector< std::string > names;
        for ( const auto& v : ts.state_vars )
            names.push_back( v.name );
        auto check = [ & ]( const std::vector< logic::Cube >& m, const std::string& what ) {
            ++mutants;
            if ( !certificate::check_certificate( certificate::export_certificate( ts, m, info ) ).pass )
                ++detected;
            else
                survivors.push_back( run.program + "@" + run.config + ": " + what );
        };
        for ( std::size_t k = 0; k < inv.size(); ++k )
        {
            auto deleted = inv;
            deleted.erase( deleted.begin() + static_cast< std::ptrdiff_t >( k ) );
            check( deleted, "delete not (" + logic::render_cube( inv[ k ], layout, names ) + ")" );
            for ( std::size_t i = 0; i < inv[ k ].size(); ++i )
            {
                auto lits = inv[ k ].lits();
                lits[ i ].value = !lits[ i ].value;
                auto flipped = inv;
                flipped[ k ] = logic::Cube( lits );
                check( flipped, "flip bit " + std::to_string( lits[ i ].bit ) + " of not (" +
                                        logic::render_cube( inv[ k ], layout, names ) + ")" );
            }
        }
    }
    Outcome out;
    const double rate = mutants == 0 ? 0.0 : static_cast< double >( detected ) / static_cast< double >( mutants );
    out.pass = certificates > 0 && rate >= mutation_rate;
    out.detail = std::to_string( certificates ) + " distinct certificates, " + std::to_string( detected ) + "/" +
                 std::to_string( mutants ) + " mutants detected (" + fmt( 100 * rate ) + "%)";
    for ( const auto& s : survivors )
        out.detail += "\n    survives: " + s;
    return out;
}

Outcome incrementality()
{
    std::uint64_t inc = 0, noninc = 0;
    for ( const auto& r : sweep().rows )
        if ( r.config.placement != Placement::EveryInst )
            ( r.config.incremental ? inc : noninc ) += r.queries;
    Outcome out;
    out.pass = inc < noninc;
    const double saved = noninc == 0 ? 0.0 : 100.0 * ( 1.0 - static_cast< double >( inc ) / static_cast< double >( noninc ) );
    out.detail = "solver queries incremental " + std::to_string( inc ) + ", non-incremental " + std::to_string( noninc ) +
                 " (" + fmt( saved, 1 ) + "% fewer)";
    return out;
}

std::string read_all( const fs::path& p ) { return support::read_file( p.string() ); }

// Drops the time_ms column, the only wall-clock measurement in the CSV.
std::string mask_time( const std::string& csv )
{
    std::istringstream in( csv );
    std::string out;
    for ( std::string line; std::getline( in, line ); )
    {
        std::vector< std::string > cells;
        std::stringstream ls( line );
        for ( std::string c; std::getline( ls, c, ',' ); )
            cells.push_back( c );
        if ( cells.size() > 8 )
            cells[ 8 ] = "*";
        for ( std::size_t i = 0; i < cells.size(); ++i )
            out += ( i ? "," : "" ) + cells[ i ];
        out += "\n";
    }
    return out;
}

Outcome determinism()
{
    Outcome out;
    const fs::path dir = fs::temp_directory_path() / ( "specfence-acceptance-" + std::to_string( ::getpid() ) );
    fs::remove_all( dir );
    fs::create_directories( dir );
    for ( const char* run : { "1", "2" } )
    {
        const std::string cmd = std::string( SPECFENCE_CLI ) + " bench " + support::corpus_path( "kocher" ) +
                                " --seed 0 --out " + ( dir / ( std::string( "run" ) + run + ".csv" ) ).string() +
                                " --cert-dir " + ( dir / ( std::string( "certs" ) + run ) ).string() + " 2>/dev/null";
        if ( std::system( cmd.c_str() ) != 0 )
        {
            out.pass = false;
            out.detail = "bench run " + std::string( run ) + " failed";
            return out;
        }
    }
    const auto a = read_all( dir / "run1.csv" ), b = read_all( dir / "run2.csv" );
    const bool csv_same = mask_time( a ) == mask_time( b );
    std::size_t certs = 0, same = 0;
    for ( const auto& e : fs::directory_iterator( dir / "certs1" ) )
    {
        ++certs;
        const auto other = dir / "certs2" / e.path().filename();
        if ( fs::exists( other ) && read_all( e.path() ) == read_all( other ) )
            ++same;
    }
    const auto count2 = std::distance( fs::directory_iterator( dir / "certs2" ), fs::directory_iterator{} );
    out.pass = csv_same && certs > 0 && same == certs && static_cast< std::size_t >( count2 ) == certs;
    out.detail = std::string( "CSV " ) + ( csv_same ? "identical" : "differs" ) + " outside time_ms (raw bytes " +
                 ( a == b ? "identical" : "differ in time_ms" ) + "), " + std::to_string( same ) + "/" +
                 std::to_string( certs ) + " certificates byte-identical";
    fs::remove_all( dir );
    return out;
}

} // namespace

int main()
{
    const std::vector< std::pair< std::string, std::function< Outcome() > > > criteria = {
            { "fig1 after-branch repair", [] { return fig1( Placement::AfterBranch, { "then@L0" } ); } },
            { "fig1 before-memory repair", [] { return fig1( Placement::BeforeMemory, { "before@L2" } ); } },
            { "corpus soundness sweep", corpus_sweep },
            { "oracle equivalence", oracle_equivalence },
            { "placement dominance", dominance },
            { "bounded-window semantics", bounded_window },
            { "lemma suite", lemma_suite },
            { "certificate mutation testing", mutation_testing },
            { "incrementality effect", incrementality },
            { "determinism", determinism },
    };
    int failed = 0;
    for ( std::size_t i = 0; i < criteria.size(); ++i )
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = criteria[ i ].second();
        }
        catch ( const std::exception& e )
        {
            o = { false, std::string( "exception: " ) + e.what() };
        }
        failed += o.pass ? 0 : 1;
        std::cout << "criterion " << i + 1 << ": " << ( o.pass ? "PASS" : "FAIL" ) << "  " << criteria[ i ].first << " ("
                  << fmt( seconds_since( t0 ) ) << " s): " << o.detail << std::endl;
    }
    std::cout << ( failed == 0 ? "all criteria pass" : std::to_string( failed ) + " criteria fail" ) << std::endl;
    return failed == 0 ? 0 : 1;
}
