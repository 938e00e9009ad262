#include "specfence/certificate/certificate.hpp"
#include "specfence/cli/driver.hpp"
#include "specfence/logic/check.hpp"
#include "specfence/pdr/engine.hpp"
#include "specfence/repair/repair.hpp"
#include "specfence/threat/threat.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace specfence;

namespace
{

enum Exit
{
    Ok = 0,
    Unsafe = 1,
    InputError = 2,
    ResourceError = 3,
};

struct Flags
{
    std::string path;
    std::string threat = "strong";
    std::string mode = "unbounded";
    std::string placement = "after-branch";
    std::string activation = "nearest";
    std::string incremental = "on";
    std::string fences;
    std::uint64_t seed = 0;
    double timeout = 0;
    std::string log;
    std::string out;
    std::string solver_cmd;
    std::string cert_dir;
};

void add_common( CLI::App* cmd, Flags& f )
{
    cmd->add_option( "--threat", f.threat, "strong|classical" );
    cmd->add_option( "--mode", f.mode, "unbounded|bounded:<k>" );
    cmd->add_option( "--placement", f.placement, "every-inst|after-branch|before-memory" );
    cmd->add_option( "--activation", f.activation, "nearest|split-point" );
    cmd->add_option( "--incremental", f.incremental, "on|off" );
    cmd->add_option( "--fences", f.fences, "comma-separated site ids active from the start" );
    cmd->add_option( "--seed", f.seed, "solver seed" );
    cmd->add_option( "--timeout", f.timeout, "wall-clock limit in seconds" );
    cmd->add_option( "--log", f.log, "'pdr' prints every rule application to stderr" );
    cmd->add_option( "--out", f.out, "output path" );
}

repair::RepairOptions repair_options( const Flags& f )
{
    repair::RepairOptions o;
    o.threat = cli::parse_threat( f.threat );
    o.mode = cli::parse_mode( f.mode );
    o.placement = cli::parse_placement( f.placement );
    o.activation = cli::parse_activation( f.activation );
    o.incremental = cli::parse_switch( f.incremental );
    o.seed = f.seed;
    o.timeout = f.timeout;
    for ( const auto& s : cli::parse_list( f.fences ) )
        o.initial_fences.insert( s );
    if ( !f.log.empty() )
    {
        if ( f.log != "pdr" )
            throw cli::UsageError( "--log accepts only 'pdr'" );
        o.log = []( const pdr::RuleEvent& ev ) {
            std::cerr << "pdr: " << pdr::to_string( ev.rule ) << " level=" << ev.level << " cube=" << ev.cube_size << "\n";
        };
    }
    return o;
}

encode::TransitionSystem system_for( const ir::Program& p, const repair::RepairOptions& o )
{
    std::set< std::string > known;
    const auto bare = repair::speculative_system( p, [ & ] {
        auto plain = o;
        plain.initial_fences.clear();
        return plain;
    }() );
    for ( const auto& s : bare.fence_sites )
        known.insert( s.id );
    for ( const auto& f : o.initial_fences )
        if ( !known.contains( f ) )
            throw cli::UsageError( "unknown fence site '" + f + "' for placement " + encode::to_string( o.placement ) );
    return repair::speculative_system( p, o );
}

std::string cert_path( const Flags& f, const ir::Program& p )
{
    return f.out.empty() ? p.name + ".cert.smt2" : f.out;
}

void write_file( const std::string& path, const std::string& text )
{
    std::ofstream out( path );
    if ( !out )
        throw std::runtime_error( "cannot write " + path );
    out << text;
}

int cmd_verify( const Flags& f )
{
    const auto p = cli::load_program( f.path );
    const auto o = repair_options( f );
    const auto ts = system_for( p, o );
    pdr::EngineOptions eo;
    eo.seed = o.seed;
    eo.log = o.log;
    pdr::Engine engine( ts, eo );
    const auto t0 = std::chrono::steady_clock::now();
    pdr::StepResult r;
    while ( ( r = engine.step() ) == pdr::StepResult::Continue )
        if ( o.timeout > 0 && std::chrono::duration< double >( std::chrono::steady_clock::now() - t0 ).count() > o.timeout )
            throw repair::TimeoutError( "verify: time limit exceeded" );
    if ( r == pdr::StepResult::LeakFound )
    {
        std::cout << p.name << ": UNSAFE\n" << cli::render_trace( ts, engine.reconstruct_execution() );
        return Unsafe;
    }
    const auto path = cert_path( f, p );
    write_file( path, cli::make_certificate( ts, engine.invariant_cubes(), p.name, o.threat ) );
    std::cout << p.name << ": SAFE\ncertificate: " << path << "\n";
    return Ok;
}

int cmd_repair( const Flags& f )
{
    const auto p = cli::load_program( f.path );
    const auto o = repair_options( f );
    const auto r = repair::repair_system( system_for( p, o ), o );
    const auto cert = cli::make_certificate( r.system, r.invariant_cubes, p.name, o.threat );
    if ( !certificate::check_certificate( cert ).pass )
    {
        std::cerr << "error: the certificate failed its self-check\n";
        return ResourceError;
    }
    const auto path = cert_path( f, p );
    write_file( path, cert );
    std::cout << p.name << ": SAFE with " << r.fences.size() << " fence" << ( r.fences.size() == 1 ? "" : "s" ) << " ("
              << r.iterations.size() << ( r.iterations.size() == 1 ? " iteration, " : " iterations, " ) << r.queries << " solver queries, " << r.available_sites
              << " sites)\n";
    if ( !r.fences.empty() )
        std::cout << "fences:\n" << cli::fence_report( p, r.system, r.fences );
    for ( std::size_t i = 0; i < r.iterations.size(); ++i )
    {
        const auto& it = r.iterations[ i ];
        std::cout << "iteration " << i + 1 << ": leak of " << it.trace.size() << " states, split point " << it.split_point
                  << ", fenced " << it.fence << ", lemmas kept " << it.lemmas_kept << " dropped " << it.lemmas_dropped
                  << "\n";
    }
    std::cout << "certificate: " << path << " (checked)\n";
    return Ok;
}

int cmd_taint( const Flags& f )
{
    const auto p = cli::load_program( f.path );
    const auto model = cli::parse_threat( f.threat );
    std::cout << threat::render_taint_map( p, threat::taint_map( p ) );
    const auto vinst = threat::compute_vinst( p, model );
    std::cout << "vulnerable (" << threat::to_string( model ) << "):";
    for ( const auto& [ l, reason ] : vinst.labels )
        std::cout << " " << ir::label_name( l );
    std::cout << "\n";
    return Ok;
}

int cmd_encode( const Flags& f )
{
    const auto p = cli::load_program( f.path );
    const auto ts = system_for( p, repair_options( f ) );
    std::cout << "system " << ts.name << ": " << ts.num_state() << " state variables, " << ts.state_bits()
              << " state bits, " << ts.num_inputs() << " inputs\n";
    for ( const auto& v : ts.state_vars )
        std::cout << "  state " << v.name << " : u" << v.width << "\n";
    for ( const auto& in : ts.inputs )
        std::cout << "  input " << in.name << " : u" << in.width << "\n";
    for ( const auto& cp : ts.pc_codes )
        std::cout << "  pc " << cp.code << " = " << cli::code_name( ts, cp.code ) << "\n";
    const auto active = encode::active_fences( ts );
    for ( const auto& s : ts.fence_sites )
        std::cout << "  site " << s.id << ( active.contains( s.id ) ? " (active)" : "" ) << "\n";
    const auto red = encode::cone_of_influence( ts );
    std::cout << "cone of influence: " << red.reduced.num_state() << " state variables, " << red.reduced.state_bits()
              << " bits\n";
    return Ok;
}

int cmd_check_cert( const Flags& f )
{
    std::ifstream in( f.path );
    if ( !in )
        throw cli::UsageError( "cannot read " + f.path );
    std::ostringstream os;
    os << in.rdbuf();
    const std::string text = os.str();
    const auto r = f.solver_cmd.empty() ? certificate::check_certificate( text )
                                        : certificate::check_certificate_external( text, f.solver_cmd );
    if ( r.pass )
    {
        std::cout << "PASS\n";
        return Ok;
    }
    std::cout << "FAIL " << certificate::to_string( *r.failed ) << "\n";
    if ( !r.witness.empty() )
        std::cout << "witness:\n" << certificate::render_witness( text, r.witness );
    return Unsafe;
}

int cmd_bench( const Flags& f )
{
    cli::BenchOptions o;
    o.threat = cli::parse_threat( f.threat );
    const auto mode = cli::parse_mode( f.mode == "unbounded" ? "bounded:4" : f.mode );
    o.bound = *mode.bound;
    o.seed = f.seed;
    o.timeout = f.timeout;
    if ( !f.cert_dir.empty() )
        o.cert_dir = f.cert_dir;
    if ( !std::filesystem::is_directory( f.path ) )
        throw cli::UsageError( f.path + " is not a directory" );
    std::ostringstream csv;
    csv << cli::csv_header() << "\n";
    bool all_passed = true;
    for ( const auto& file : cli::corpus_files( f.path ) )
        for ( const auto& c : cli::bench_configs( o.bound ) )
        {
            const auto row = cli::bench_one( file, c, o );
            all_passed = all_passed && ( row.verdict == "TIMEOUT" || row.certificate_passed );
            csv << cli::csv_line( row ) << "\n";
            std::cerr << cli::csv_line( row ) << "\n";
        }
    if ( f.out.empty() )
        std::cout << csv.str();
    else
        write_file( f.out, csv.str() );
    if ( !all_passed )
    {
        std::cerr << "error: a certificate failed its self-check\n";
        return ResourceError;
    }
    return Ok;
}

} // namespace

int main( int argc, char** argv )
{
    CLI::App app{ "Verify and repair programs against speculative-execution leaks" };
    app.require_subcommand( 1 );
    Flags f;
    auto* verify = app.add_subcommand( "verify", "prove the program leak-free or show a leaking execution" );
    auto* repair = app.add_subcommand( "repair", "activate fences until the program is leak-free" );
    auto* taint = app.add_subcommand( "taint", "print the taint analysis and the vulnerable instructions" );
    auto* encode = app.add_subcommand( "encode", "print the speculative transition system" );
    auto* check = app.add_subcommand( "check-cert", "re-check a certificate" );
    auto* bench = app.add_subcommand( "bench", "repair every .sir file of a directory under all configurations" );
    for ( auto* cmd : { verify, repair, taint, encode, bench } )
    {
        cmd->add_option( "path", f.path, "program file or corpus directory" )->required();
        add_common( cmd, f );
    }
    bench->add_option( "--cert-dir", f.cert_dir, "write every certificate into this directory" );
    check->add_option( "path", f.path, "certificate file" )->required();
    check->add_option( "--solver-cmd", f.solver_cmd, "external SMT solver command, given the file as last argument" );

    try
    {
        app.parse( argc, argv );
    }
    catch ( const CLI::ParseError& e )
    {
        const int code = app.exit( e );
        return code == 0 ? Ok : InputError;
    }

    try
    {
        if ( *verify )
            return cmd_verify( f );
        if ( *repair )
            return cmd_repair( f );
        if ( *taint )
            return cmd_taint( f );
        if ( *encode )
            return cmd_encode( f );
        if ( *check )
            return cmd_check_cert( f );
        return cmd_bench( f );
    }
    catch ( const ir::ParseError& e )
    {
        std::cerr << f.path << ":" << e.line << ":" << e.column << ": " << e.what() << "\n";
        return InputError;
    }
    catch ( const ir::ValidationError& e )
    {
        std::cerr << f.path << ": " << e.what() << "\n";
        return InputError;
    }
    catch ( const cli::UsageError& e )
    {
        std::cerr << "error: " << e.what() << "\n";
        return InputError;
    }
    catch ( const certificate::ParseError& e )
    {
        std::cerr << f.path << ": " << e.what() << "\n";
        return InputError;
    }
    catch ( const repair::TimeoutError& e )
    {
        std::cerr << "error: " << e.what() << "\n";
        return ResourceError;
    }
    catch ( const std::bad_alloc& )
    {
        std::cerr << "error: out of memory\n";
        return ResourceError;
    }
    catch ( const std::exception& e )
    {
        std::cerr << "error: " << e.what() << "\n";
        return ResourceError;
    }
}
