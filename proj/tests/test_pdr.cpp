#include "test_support.hpp"

#include "specfence/logic/check.hpp"
#include "specfence/logic/explicit.hpp"
#include "specfence/pdr/engine.hpp"
#include "specfence/threat/threat.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace specfence;
using encode::Placement;
using encode::SpeculationMode;
using encode::TransitionSystem;
using logic::ExplicitVerdict;
using pdr::Engine;
using pdr::StepResult;

namespace
{

TransitionSystem speculative( const ir::Program& p, threat::ThreatModel model, Placement placement,
                              SpeculationMode mode, const std::set< std::string >& active )
{
    const auto vinst = threat::compute_vinst( p, model ).label_set();
    return encode::encode_speculative( p, vinst, encode::fence_sites( p, vinst, placement ), mode, active );
}

TransitionSystem fig1( const std::set< std::string >& active )
{
    return speculative( support::load_corpus( "fig1.sir" ), threat::ThreatModel::Classical, Placement::AfterBranch,
                        SpeculationMode::unbounded(), active );
}

pdr::EngineOptions checked()
{
    pdr::EngineOptions o;
    o.check_invariants = true;
    return o;
}

// The three inductive-invariant conditions, checked word-level on the full system.
void expect_inductive( const TransitionSystem& ts, const logic::Formula& inv )
{
    EXPECT_FALSE( logic::check_sat( logic::bv_and( ts.init(), logic::bv_not( inv ) ) ).sat );
    EXPECT_FALSE( logic::check_sat( logic::conj( { inv, ts.trans(), logic::bv_not( ts.prime( inv ) ) } ) ).sat );
    EXPECT_FALSE( logic::check_sat( logic::bv_and( inv, ts.bad ) ).sat );
}

// On a speculative execution spec starts at 0, never returns to 0
// once positive, and is positive at the end.
void expect_spec_shape( const TransitionSystem& ts, const encode::Trace& t )
{
    const std::size_t spec = *ts.spec_var;
    ASSERT_FALSE( t.states.empty() );
    EXPECT_EQ( t.states.front()[ spec ], 0u );
    EXPECT_GT( t.states.back()[ spec ], 0u );
    int flips = 0;
    for ( std::size_t j = 1; j < t.states.size(); ++j )
    {
        EXPECT_FALSE( t.states[ j - 1 ][ spec ] > 0 && t.states[ j ][ spec ] == 0 );
        flips += t.states[ j - 1 ][ spec ] == 0 && t.states[ j ][ spec ] > 0 ? 1 : 0;
    }
    EXPECT_EQ( flips, 1 );
}

} // namespace

TEST( Engine, Fig1UnfencedLeaks )
{
    const auto ts = fig1( {} );
    Engine e( ts, checked() );
    EXPECT_EQ( e.level(), 0u );
    ASSERT_EQ( e.run(), StepResult::LeakFound );
    const auto t = e.reconstruct_execution();
    EXPECT_FALSE( ts.validate_trace( t ).has_value() );
    const auto oracle = logic::explicit_reachable( ts );
    ASSERT_EQ( oracle.verdict, ExplicitVerdict::Unsafe );
    EXPECT_EQ( t.size(), oracle.trace->size() );
    EXPECT_EQ( t.states.front()[ *ts.pc_var ], oracle.trace->states.front()[ *ts.pc_var ] );
    EXPECT_EQ( t.states.back()[ *ts.pc_var ], ts.bottom_code() );
    expect_spec_shape( ts, t );
    EXPECT_THROW( (void)e.extract_invariant(), pdr::NotSafeError );
}

TEST( Engine, Fig1ThenFenceIsSafe )
{
    const auto ts = fig1( { "then@L0" } );
    Engine e( ts, checked() );
    ASSERT_EQ( e.run(), StepResult::Safe );
    const auto inv = e.extract_invariant();
    expect_inductive( ts, inv );
    // The invariant excludes reaching the assertion node of L2 speculatively.
    const auto pc = ts.state_term( *ts.pc_var );
    const auto spec = ts.state_term( *ts.spec_var );
    const auto at_assert = logic::eq( pc, logic::constant( ts.pc_code( encode::CodeKind::Assertion, 2 ), pc.width() ) );
    EXPECT_FALSE( logic::check_sat( logic::conj( { inv, at_assert, spec } ) ).sat );
}

TEST( Engine, FalseBadIsSafeImmediately )
{
    auto ts = fig1( {} );
    ts.bad = logic::ff();
    Engine e( ts, checked() );
    ASSERT_EQ( e.run(), StepResult::Safe );
    EXPECT_LE( e.level(), 1u );
    EXPECT_TRUE( e.extract_invariant().is_true() );
}

TEST( Engine, NoVulnerableInstructionsIsSafe )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto ts = encode::encode_speculative( p, {}, {}, SpeculationMode::unbounded(), {} );
    Engine e( ts, checked() );
    ASSERT_EQ( e.run(), StepResult::Safe );
    expect_inductive( ts, e.extract_invariant() );
}

TEST( Engine, RequireViolated )
{
    auto ts = fig1( {} );
    ts.bad = logic::tt();
    EXPECT_THROW( Engine{ ts }, pdr::RequireViolated );
}

TEST( Engine, RevalidateAfterFence )
{
    const auto base = fig1( {} );
    Engine e( base, checked() );
    ASSERT_EQ( e.run(), StepResult::LeakFound );
    const auto fenced = encode::add_fence( base, "then@L0" );
    e.revalidate( fenced );
    EXPECT_EQ( e.status(), StepResult::Continue );
    EXPECT_EQ( e.queue_size(), 0u );
    EXPECT_EQ( e.reach_size(), 0u );
    EXPECT_FALSE( e.check_trace_properties().has_value() );
    ASSERT_EQ( e.run(), StepResult::Safe );
    expect_inductive( fenced, e.extract_invariant() );
}

TEST( Engine, RuleLogNamesRules )
{
    std::vector< pdr::RuleEvent > events;
    pdr::EngineOptions o;
    o.log = [ & ]( const pdr::RuleEvent& ev ) { events.push_back( ev ); };
    Engine e( fig1( {} ), o );
    e.run();
    std::set< std::string > names;
    for ( const auto& ev : events )
        names.insert( pdr::to_string( ev.rule ) );
    EXPECT_TRUE( names.contains( "Candidate" ) );
    EXPECT_TRUE( names.contains( "Unfold" ) );
    EXPECT_TRUE( names.contains( "Cex" ) );
    EXPECT_TRUE( names.contains( "Successor" ) );
}

TEST( Properties, VerdictsMatchExplicitOracle )
{
    support::ProgramGenerator gen( 2024 );
    std::set< std::string > rules;
    int compared = 0;
    int leaks = 0;
    logic::ExplicitOptions small;
    small.state_budget = 1 << 16;
    for ( int n = 0; n < 250; ++n )
    {
        const auto p = gen.program( 3 + gen.pick( 7 ) );
        const auto model = gen.pick( 2 ) == 0 ? threat::ThreatModel::Strong : threat::ThreatModel::Classical;
        const auto placement = static_cast< Placement >( gen.pick( 3 ) );
        const auto mode = gen.pick( 3 ) == 0 ? SpeculationMode::bounded( 1 + gen.pick( 4 ) ) : SpeculationMode::unbounded();
        const auto vinst = threat::compute_vinst( p, model ).label_set();
        const auto sites = encode::fence_sites( p, vinst, placement );
        std::set< std::string > active;
        for ( const auto& s : sites )
            if ( gen.pick( 3 ) == 0 )
                active.insert( s.id );
        const auto ts = encode::encode_speculative( p, vinst, sites, mode, active );
        const auto oracle = logic::explicit_reachable( ts, small );
        if ( oracle.verdict == ExplicitVerdict::BudgetExceeded )
            continue;
        ++compared;
        auto o = checked();
        o.log = [ & ]( const pdr::RuleEvent& ev ) { rules.insert( pdr::to_string( ev.rule ) ); };
        Engine e( ts, o );
        const auto r = e.run();
        ASSERT_EQ( r == StepResult::Safe, oracle.verdict == ExplicitVerdict::Safe ) << ir::print_program( p );
        if ( r == StepResult::LeakFound )
        {
            ++leaks;
            const auto t = e.reconstruct_execution();
            EXPECT_FALSE( ts.validate_trace( t ).has_value() );
            // The flip property presumes the program is safe without speculation.
            if ( logic::explicit_reachable( encode::encode_standard( p ) ).verdict == ExplicitVerdict::Safe )
                expect_spec_shape( ts, t );
            // Shortest traces can only be shorter than ours.
            EXPECT_GE( t.size(), oracle.trace->size() );
        }
        else
            expect_inductive( ts, e.extract_invariant() );
    }
    EXPECT_GT( compared, 100 );
    EXPECT_GT( leaks, 20 );
    for ( const char* r : { "Safe", "Cex", "Unfold", "Candidate", "Predecessor", "NewLemma", "ReQueue", "Push",
                            "MaxIndSubset", "Successor" } )
        EXPECT_TRUE( rules.contains( r ) ) << r;
}
