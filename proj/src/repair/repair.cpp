#include "specfence/repair/repair.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <optional>

namespace specfence::repair
{

using encode::CodeKind;
using encode::FencePosition;
using encode::State;

namespace
{

using Clock = std::chrono::steady_clock;

double ms_since( Clock::time_point t0 )
{
    return std::chrono::duration< double, std::milli >( Clock::now() - t0 ).count();
}

struct Occurrence
{
    std::size_t step;
    std::string site;
};

std::vector< Occurrence > occurrences( const TransitionSystem& ts, const Trace& t )
{
    const std::size_t k = speculative_split_point( ts, t );
    const auto active = encode::active_fences( ts );
    std::vector< Occurrence > out;
    for ( std::size_t j = k - 1; j + 1 < t.states.size(); ++j )
    {
        // A stuttering step is not stopped by a fence.
        if ( t.states[ j ] == t.states[ j + 1 ] )
            continue;
        const auto cp = ts.decode_pc( t.states[ j ][ *ts.pc_var ] );
        if ( !cp || ( cp->kind != CodeKind::Instruction && cp->kind != CodeKind::Assertion ) )
            continue;
        for ( const auto& site : ts.fence_sites )
        {
            if ( active.contains( site.id ) )
                continue;
            if ( site.position == FencePosition::Before )
            {
                // The check sits at the assertion node of a vulnerable instruction.
                const auto entry = ts.vinst.contains( site.anchor ) ? CodeKind::Assertion : CodeKind::Instruction;
                if ( j >= k && site.anchor == cp->label && cp->kind == entry )
                    out.push_back( { j, site.id } );
                continue;
            }
            if ( cp->kind != CodeKind::Instruction || site.branch != cp->label )
                continue;
            const auto choose = ts.find_input( "choose_" + ir::label_name( cp->label ) );
            if ( !choose )
                continue;
            const bool then_side = t.inputs[ j ][ *choose ] != 0;
            if ( then_side == ( site.position == FencePosition::AfterBranchThen ) )
                out.push_back( { j, site.id } );
        }
    }
    return out;
}

// Replays the inputs of t on ts starting from t's first state with ts's
// fence values. Returns the first step whose result differs from t.
std::optional< std::size_t > divergence( const TransitionSystem& ts, const Trace& t )
{
    auto adjust = [ & ]( State s ) {
        for ( const auto& [ _, var ] : ts.fence_vars )
            s[ var ] = ts.init_values[ var ].value_or( 0 );
        return s;
    };
    State s = adjust( t.states.front() );
    for ( std::size_t j = 0; j + 1 < t.states.size(); ++j )
    {
        s = ts.step( s, t.inputs[ j ] );
        if ( s != adjust( t.states[ j + 1 ] ) )
            return j;
    }
    return std::nullopt;
}

} // namespace

std::string to_string( Activation a ) { return a == Activation::Nearest ? "nearest" : "split-point"; }

std::size_t speculative_split_point( const TransitionSystem& ts, const Trace& t )
{
    if ( !ts.spec_var )
        throw MalformedTrace( "split point: system has no speculation flag" );
    const std::size_t spec = *ts.spec_var;
    std::optional< std::size_t > k;
    for ( std::size_t j = 1; j < t.states.size(); ++j )
    {
        const bool before = t.states[ j - 1 ][ spec ] > 0;
        const bool after = t.states[ j ][ spec ] > 0;
        if ( !before && after )
        {
            if ( k )
                throw MalformedTrace( "split point: speculation starts more than once" );
            k = j;
        }
        if ( before && !after )
            throw MalformedTrace( "split point: speculation ends before Bad" );
    }
    if ( !k )
        throw MalformedTrace( "split point: the trace never speculates" );
    return *k;
}

std::vector< std::string > covering_sites( const TransitionSystem& ts, const Trace& t )
{
    std::vector< std::string > out;
    for ( auto& o : occurrences( ts, t ) )
        out.push_back( std::move( o.site ) );
    return out;
}

std::string choose_fence( const TransitionSystem& ts, const Trace& t, Activation activation )
{
    const auto occ = occurrences( ts, t );
    if ( occ.empty() )
        throw NoSiteCoversLeak( "no inactive fence site lies on the speculating suffix of the leak" );
    return activation == Activation::Nearest ? occ.back().site : occ.front().site;
}

TransitionSystem speculative_system( const ir::Program& p, const RepairOptions& options )
{
    const auto vinst = threat::compute_vinst( p, options.threat, options.loads_only ).label_set();
    const auto sites = encode::fence_sites( p, vinst, options.placement );
    return encode::encode_speculative( p, vinst, sites, options.mode, options.initial_fences );
}

RepairResult repair( const ir::Program& p, const RepairOptions& options )
{
    return repair_system( speculative_system( p, options ), options );
}

RepairResult repair_system( const TransitionSystem& start, const RepairOptions& options )
{
    const auto t0 = Clock::now();
    RepairResult result;
    result.available_sites = start.fence_sites.size();

    pdr::EngineOptions eo;
    eo.seed = options.seed;
    eo.check_invariants = options.check_invariants;
    eo.log = options.log;

    TransitionSystem ts = start;
    auto engine = std::make_unique< pdr::Engine >( ts, eo );
    std::uint64_t retired_queries = 0;
    auto queries = [ & ]() { return retired_queries + engine->stats().queries; };

    for ( ;; )
    {
        auto it0 = Clock::now();
        const std::uint64_t q0 = queries();
        pdr::StepResult r;
        while ( ( r = engine->step() ) == pdr::StepResult::Continue )
            if ( options.timeout > 0 && ms_since( t0 ) > options.timeout * 1000 )
                throw TimeoutError( "repair: time limit exceeded" );
        if ( r == pdr::StepResult::Safe )
            break;

        IterationStats it;
        it.active = encode::active_fences( ts );
        it.trace = engine->reconstruct_execution();
        it.split_point = speculative_split_point( ts, it.trace );
        it.fence = choose_fence( ts, it.trace, options.activation );

        TransitionSystem next = encode::add_fence( ts, it.fence );
        // The leak must not survive the new fence, and must be cut no later
        // than where the fence sits.
        std::size_t at = 0;
        for ( const auto& o : occurrences( ts, it.trace ) )
            if ( o.site == it.fence )
                at = o.step;
        const auto cut = divergence( next, it.trace );
        if ( !cut || *cut > at )
            throw pdr::InternalError( "repair: fence " + it.fence + " does not cut the leaking execution" );

        if ( options.incremental )
        {
            engine->reset_queue();
            engine->reset_reach();
            const auto kept = engine->revalidate( next );
            it.lemmas_kept = kept.kept;
            it.lemmas_dropped = kept.dropped;
        }
        else
        {
            const auto view = engine->frames();
            std::size_t lemmas = view.infinity.size();
            for ( const auto& f : view.frames )
                lemmas += f.size();
            it.lemmas_dropped = lemmas;
            retired_queries += engine->stats().queries;
            engine = std::make_unique< pdr::Engine >( next, eo );
        }
        it.queries = queries() - q0;
        it.time_ms = ms_since( it0 );
        result.lemmas_kept += it.lemmas_kept;
        result.lemmas_dropped += it.lemmas_dropped;
        result.fences.push_back( it.fence );
        result.iterations.push_back( std::move( it ) );
        ts = std::move( next );
        if ( result.iterations.size() > result.available_sites )
            throw pdr::InternalError( "repair: more iterations than fence sites" );
    }

    result.system = ts;
    result.invariant = engine->extract_invariant();
    result.invariant_cubes = engine->invariant_cubes();
    result.queries = queries();
    result.time_ms = ms_since( t0 );
    return result;
}

} // namespace specfence::repair
