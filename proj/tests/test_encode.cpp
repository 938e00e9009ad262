#include "test_support.hpp"

#include "specfence/encode/transition_system.hpp"
#include "specfence/logic/check.hpp"
#include "specfence/logic/explicit.hpp"
#include "specfence/threat/threat.hpp"

#include <gtest/gtest.h>

using namespace specfence;
using namespace specfence::encode;
using logic::ExplicitVerdict;
using ir::Label;

namespace
{

TransitionSystem fig1_speculative( const std::set< std::string >& active, Placement placement = Placement::AfterBranch,
                                   SpeculationMode mode = SpeculationMode::unbounded() )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto vinst = threat::compute_vinst( p, threat::ThreatModel::Classical ).label_set();
    return encode_speculative( p, vinst, fence_sites( p, vinst, placement ), mode, active );
}

std::uint64_t pc_of( const TransitionSystem& ts, const State& s ) { return s[ *ts.pc_var ]; }

} // namespace

TEST( Standard, Fig1Shape )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto ts = encode_standard( p );
    // i, k, tmp, a[0..3], b[0..63], pc
    EXPECT_EQ( ts.num_state(), 3u + 4u + 64u + 1u );
    EXPECT_EQ( ts.state_vars[ *ts.pc_var ].width, 3u );
    EXPECT_EQ( ts.bottom_code(), 7u );
    EXPECT_FALSE( ts.spec_var.has_value() );
    EXPECT_TRUE( ts.find_state( "b[63]" ).has_value() );
    EXPECT_EQ( ts.init_values[ *ts.pc_var ], std::optional< std::uint64_t >{ 0 } );
    EXPECT_FALSE( ts.init_values[ *ts.find_state( "i" ) ].has_value() );
    EXPECT_EQ( logic::explicit_reachable( ts ).verdict, ExplicitVerdict::Safe );
}

TEST( Standard, AssertFalseReachesBadInOneStep )
{
    const auto p = ir::parse_program( "program t\nvar x : u1\nL0: assert 0\nL1: halt\n" );
    const auto r = logic::explicit_reachable( encode_standard( p ) );
    ASSERT_EQ( r.verdict, ExplicitVerdict::Unsafe );
    EXPECT_EQ( r.trace->size(), 2u );
}

TEST( Standard, AssumeBlocksForever )
{
    const auto p = ir::parse_program( "program t\nvar x : u1\nL0: assume 0\nL1: assert 0\nL2: halt\n" );
    EXPECT_EQ( logic::explicit_reachable( encode_standard( p ) ).verdict, ExplicitVerdict::Safe );
}

TEST( Standard, CapacityBudget )
{
    const auto p = support::load_corpus( "fig1.sir" );
    EncodeOptions o;
    o.max_state_bits = 100;
    EXPECT_THROW( encode_standard( p, o ), CapacityError );
}

TEST( Sites, Fig1Placements )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto classical = threat::compute_vinst( p, threat::ThreatModel::Classical ).label_set();
    const auto after = fence_sites( p, classical, Placement::AfterBranch );
    ASSERT_EQ( after.size(), 2u );
    EXPECT_EQ( after[ 0 ].id, "then@L0" );
    EXPECT_EQ( after[ 0 ].anchor, 1u );
    EXPECT_EQ( after[ 1 ].id, "else@L0" );
    EXPECT_EQ( after[ 1 ].anchor, 3u );
    const auto before = fence_sites( p, classical, Placement::BeforeMemory );
    ASSERT_EQ( before.size(), 1u );
    EXPECT_EQ( before[ 0 ].id, "before@L2" );
    EXPECT_EQ( before[ 0 ].anchor, 2u );
    EXPECT_TRUE( fence_sites( p, {}, Placement::BeforeMemory ).empty() );
    // halt is excluded from every-instruction placement
    EXPECT_EQ( fence_sites( p, classical, Placement::EveryInst ).size(), 3u );
}

TEST( Speculative, Fig1UnfencedLeaks )
{
    const auto ts = fig1_speculative( {} );
    EXPECT_EQ( ts.state_vars[ *ts.spec_var ].width, 1u );
    const auto r = logic::explicit_reachable( ts );
    ASSERT_EQ( r.verdict, ExplicitVerdict::Unsafe );
    const auto& t = *r.trace;
    ASSERT_EQ( t.size(), 4u );
    EXPECT_FALSE( ts.validate_trace( t ).has_value() );
    EXPECT_EQ( pc_of( ts, t.states[ 0 ] ), ts.pc_code( CodeKind::Instruction, 0 ) );
    EXPECT_EQ( pc_of( ts, t.states[ 1 ] ), ts.pc_code( CodeKind::Instruction, 1 ) );
    EXPECT_EQ( pc_of( ts, t.states[ 2 ] ), ts.pc_code( CodeKind::Assertion, 2 ) );
    EXPECT_EQ( pc_of( ts, t.states[ 3 ] ), ts.bottom_code() );
    EXPECT_EQ( t.states[ 0 ][ *ts.spec_var ], 0u );
    EXPECT_EQ( t.states[ 1 ][ *ts.spec_var ], 1u );
    // the mispredicted branch: i >= 4 yet the then side was taken
    EXPECT_GE( t.states[ 0 ][ *ts.find_state( "i" ) ], 4u );
}

TEST( Speculative, ThenFenceMakesFig1Safe )
{
    EXPECT_EQ( logic::explicit_reachable( fig1_speculative( { "then@L0" } ) ).verdict, ExplicitVerdict::Safe );
    EXPECT_EQ( logic::explicit_reachable( fig1_speculative( { "else@L0" } ) ).verdict, ExplicitVerdict::Unsafe );
    EXPECT_EQ( logic::explicit_reachable( fig1_speculative( { "before@L2" }, Placement::BeforeMemory ) ).verdict,
               ExplicitVerdict::Safe );
}

TEST( Speculative, StandardFig1HasNoAssertionNodes )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto ts = encode_speculative( p, {}, {}, SpeculationMode::unbounded(), {} );
    EXPECT_EQ( logic::explicit_reachable( ts ).verdict, ExplicitVerdict::Safe );
}

TEST( Speculative, AddFenceMatchesDirectEncoding )
{
    const auto base = fig1_speculative( {} );
    const auto fenced = add_fence( base, "then@L0" );
    const auto direct = fig1_speculative( { "then@L0" } );
    EXPECT_EQ( fenced.init_values, direct.init_values );
    EXPECT_EQ( active_fences( fenced ), ( std::set< std::string >{ "then@L0" } ) );
    EXPECT_THROW( (void)add_fence( fenced, "then@L0" ), AlreadyActiveError );
    // The else-side fence is never reached speculatively in a leak.
    const auto other = add_fence( base, "else@L0" );
    EXPECT_EQ( logic::explicit_reachable( other ).verdict, logic::explicit_reachable( base ).verdict );
}

TEST( Speculative, GuardsCoverEveryState )
{
    for ( auto mode : { SpeculationMode::unbounded(), SpeculationMode::bounded( 3 ) } )
    {
        const auto ts = fig1_speculative( {}, Placement::AfterBranch, mode );
        EXPECT_FALSE( logic::check_sat( logic::bv_not( ts.guard_cover() ) ).sat );
    }
}

TEST( Speculative, ConeOfInfluenceDropsDataOnlyState )
{
    const auto ts = fig1_speculative( {} );
    const auto red = cone_of_influence( ts );
    std::set< std::string > names;
    for ( const auto& v : red.reduced.state_vars )
        names.insert( v.name );
    EXPECT_EQ( names, ( std::set< std::string >{ "i", "pc", "spec", "fence[then@L0]", "fence[else@L0]" } ) );
}

TEST( Bounded, SaturatedCounterStutters )
{
    const auto ts = fig1_speculative( {}, Placement::AfterBranch, SpeculationMode::bounded( 1 ) );
    EXPECT_EQ( ts.state_vars[ *ts.spec_var ].width, 1u );
    // With a window of one instruction the mispredicted branch saturates.
    EXPECT_EQ( logic::explicit_reachable( ts ).verdict, ExplicitVerdict::Safe );
    const auto wide = fig1_speculative( {}, Placement::AfterBranch, SpeculationMode::bounded( 4 ) );
    EXPECT_EQ( wide.state_vars[ *wide.spec_var ].width, 3u );
    EXPECT_EQ( logic::explicit_reachable( wide ).verdict, ExplicitVerdict::Unsafe );
}
