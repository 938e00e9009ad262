#include "test_support.hpp"

#include "specfence/logic/check.hpp"
#include "specfence/logic/explicit.hpp"
#include "specfence/repair/repair.hpp"

#include <gtest/gtest.h>

using namespace specfence;
using encode::Placement;
using encode::SpeculationMode;
using encode::TransitionSystem;
using logic::ExplicitVerdict;
using repair::Activation;
using repair::RepairOptions;

namespace
{

RepairOptions classical( Placement placement )
{
    RepairOptions o;
    o.threat = threat::ThreatModel::Classical;
    o.placement = placement;
    o.check_invariants = true;
    return o;
}

void expect_inductive( const TransitionSystem& ts, const logic::Formula& inv )
{
    EXPECT_FALSE( logic::check_sat( logic::bv_and( ts.init(), logic::bv_not( inv ) ) ).sat );
    EXPECT_FALSE( logic::check_sat( logic::conj( { inv, ts.trans(), logic::bv_not( ts.prime( inv ) ) } ) ).sat );
    EXPECT_FALSE( logic::check_sat( logic::bv_and( inv, ts.bad ) ).sat );
}

encode::Trace oracle_leak( const TransitionSystem& ts )
{
    const auto r = logic::explicit_reachable( ts );
    if ( r.verdict != ExplicitVerdict::Unsafe )
        throw std::runtime_error( "expected a leak" );
    return *r.trace;
}

} // namespace

TEST( Repair, Fig1AfterBranchFencesThenSide )
{
    const auto r = repair::repair( support::load_corpus( "fig1.sir" ), classical( Placement::AfterBranch ) );
    EXPECT_EQ( r.fences, std::vector< std::string >{ "then@L0" } );
    ASSERT_EQ( r.iterations.size(), 1u );
    EXPECT_EQ( r.iterations[ 0 ].split_point, 1u );
    EXPECT_TRUE( r.iterations[ 0 ].active.empty() );
    expect_inductive( r.system, r.invariant );
}

TEST( Repair, Fig1BeforeMemoryFencesL2 )
{
    const auto r = repair::repair( support::load_corpus( "fig1.sir" ), classical( Placement::BeforeMemory ) );
    EXPECT_EQ( r.fences, std::vector< std::string >{ "before@L2" } );
    expect_inductive( r.system, r.invariant );
    EXPECT_EQ( logic::explicit_reachable( r.system ).verdict, ExplicitVerdict::Safe );
}

TEST( Repair, AlreadySafeProgram )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto ts = encode::encode_speculative( p, {}, {}, SpeculationMode::unbounded(), {} );
    const auto r = repair::repair_system( ts, {} );
    EXPECT_TRUE( r.fences.empty() );
    EXPECT_TRUE( r.iterations.empty() );
    expect_inductive( ts, r.invariant );
}

TEST( SplitPoint, Fig1FlipsAtTheBranch )
{
    const auto ts = repair::speculative_system( support::load_corpus( "fig1.sir" ), classical( Placement::AfterBranch ) );
    EXPECT_EQ( repair::speculative_split_point( ts, oracle_leak( ts ) ), 1u );
}

TEST( SplitPoint, DeepTraceFlipsAfterThreeStates )
{
    const auto ts =
        repair::speculative_system( support::load_corpus( "test_deep.sir" ), classical( Placement::AfterBranch ) );
    const auto t = oracle_leak( ts );
    // The mispredicted branch is at L2, reached after L0 and L1.
    EXPECT_EQ( ts.decode_pc( t.states[ 2 ][ *ts.pc_var ] )->label, 2u );
    EXPECT_EQ( repair::speculative_split_point( ts, t ), 3u );
    const auto r = repair::repair( support::load_corpus( "test_deep.sir" ), classical( Placement::AfterBranch ) );
    ASSERT_EQ( r.iterations.size(), 1u );
    EXPECT_EQ( r.iterations[ 0 ].split_point, 3u );
    EXPECT_EQ( r.fences, std::vector< std::string >{ "then@L2" } );
}

TEST( SplitPoint, NonSpeculatingTraceIsMalformed )
{
    const auto ts = repair::speculative_system( support::load_corpus( "fig1.sir" ), classical( Placement::AfterBranch ) );
    auto t = oracle_leak( ts );
    for ( auto& s : t.states )
        s[ *ts.spec_var ] = 0;
    EXPECT_THROW( repair::speculative_split_point( ts, t ), repair::MalformedTrace );
    auto twice = oracle_leak( ts );
    twice.states.resize( 4, twice.states.back() );
    for ( std::size_t j = 0; j < 4; ++j )
        twice.states[ j ][ *ts.spec_var ] = j % 2;
    EXPECT_THROW( repair::speculative_split_point( ts, twice ), repair::MalformedTrace );
}

TEST( ChooseFence, Fig1Activations )
{
    const auto p = support::load_corpus( "fig1.sir" );
    {
        const auto ts = repair::speculative_system( p, classical( Placement::AfterBranch ) );
        EXPECT_EQ( repair::choose_fence( ts, oracle_leak( ts ), Activation::Nearest ), "then@L0" );
    }
    {
        const auto ts = repair::speculative_system( p, classical( Placement::BeforeMemory ) );
        EXPECT_EQ( repair::choose_fence( ts, oracle_leak( ts ), Activation::Nearest ), "before@L2" );
    }
    {
        const auto ts = repair::speculative_system( p, classical( Placement::EveryInst ) );
        const auto t = oracle_leak( ts );
        EXPECT_EQ( repair::choose_fence( ts, t, Activation::SplitPoint ), "before@L1" );
        EXPECT_EQ( repair::choose_fence( ts, t, Activation::Nearest ), "before@L2" );
        EXPECT_EQ( repair::covering_sites( ts, t ), ( std::vector< std::string >{ "before@L1", "before@L2" } ) );
    }
}

TEST( ChooseFence, ActiveSitesAreNotOffered )
{
    auto o = classical( Placement::BeforeMemory );
    o.initial_fences = { "before@L2" };
    const auto p = support::load_corpus( "fig1.sir" );
    const auto ts = repair::speculative_system( p, classical( Placement::BeforeMemory ) );
    const auto t = oracle_leak( ts );
    EXPECT_THROW( repair::choose_fence( encode::add_fence( ts, "before@L2" ), t, Activation::Nearest ),
                  repair::NoSiteCoversLeak );
    EXPECT_TRUE( repair::repair( p, o ).fences.empty() );
}

TEST( Repair, IncrementalMatchesFresh )
{
    for ( const char* name : { "fig1.sir", "test_deep.sir" } )
        for ( auto placement : { Placement::EveryInst, Placement::AfterBranch, Placement::BeforeMemory } )
        {
            auto o = classical( placement );
            o.threat = threat::ThreatModel::Strong;
            const auto p = support::load_corpus( name );
            const auto inc = repair::repair( p, o );
            o.incremental = false;
            const auto fresh = repair::repair( p, o );
            EXPECT_EQ( inc.fences, fresh.fences ) << name;
            expect_inductive( inc.system, inc.invariant );
            expect_inductive( fresh.system, fresh.invariant );
            std::size_t dropped = 0;
            for ( const auto& it : fresh.iterations )
                dropped += it.lemmas_dropped;
            EXPECT_EQ( dropped, fresh.lemmas_dropped );
            EXPECT_EQ( fresh.lemmas_kept, 0u );
        }
}

TEST( Repair, Timeout )
{
    auto o = classical( Placement::EveryInst );
    o.timeout = 1e-9;
    EXPECT_THROW( repair::repair( support::load_corpus( "test_deep.sir" ), o ), repair::TimeoutError );
}

TEST( Properties, RepairedSystemsAreSafe )
{
    support::ProgramGenerator gen( 77 );
    gen.asserts = false;
    logic::ExplicitOptions small;
    small.state_budget = 1 << 14;
    int repaired = 0;
    for ( int n = 0; n < 150; ++n )
    {
        const auto p = gen.program( 3 + gen.pick( 7 ) );
        if ( logic::explicit_reachable( encode::encode_standard( p ), small ).verdict != ExplicitVerdict::Safe )
            continue;
        RepairOptions o;
        o.threat = gen.pick( 2 ) == 0 ? threat::ThreatModel::Strong : threat::ThreatModel::Classical;
        o.placement = static_cast< Placement >( gen.pick( 3 ) );
        o.activation = gen.pick( 2 ) == 0 ? Activation::Nearest : Activation::SplitPoint;
        o.incremental = gen.pick( 2 ) == 0;
        o.mode = gen.pick( 3 ) == 0 ? SpeculationMode::bounded( 1 + gen.pick( 4 ) ) : SpeculationMode::unbounded();
        o.check_invariants = true;
        repair::RepairResult r;
        try
        {
            r = repair::repair( p, o );
        }
        catch ( const std::exception& e )
        {
            FAIL() << e.what() << "\n" << ir::print_program( p ) << encode::to_string( o.placement ) << " "
                   << encode::to_string( o.mode ) << " " << repair::to_string( o.activation ) << " "
                   << ( o.threat == threat::ThreatModel::Strong ? "strong" : "classical" );
        }
        EXPECT_LE( r.iterations.size(), r.available_sites );
        EXPECT_EQ( encode::active_fences( r.system ).size(), r.fences.size() );
        auto at = repair::speculative_system( p, o );
        for ( const auto& it : r.iterations )
        {
            EXPECT_EQ( it.active, encode::active_fences( at ) );
            EXPECT_FALSE( at.validate_trace( it.trace ).has_value() );
            const auto covering = repair::covering_sites( at, it.trace );
            EXPECT_NE( std::find( covering.begin(), covering.end(), it.fence ), covering.end() );
            at = encode::add_fence( at, it.fence );
        }
        expect_inductive( r.system, r.invariant );
        const auto oracle = logic::explicit_reachable( r.system, small );
        EXPECT_NE( oracle.verdict, ExplicitVerdict::Unsafe ) << ir::print_program( p );
        ++repaired;
    }
    EXPECT_GT( repaired, 50 );
}
