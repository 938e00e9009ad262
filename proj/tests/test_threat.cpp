#include "test_support.hpp"

#include "specfence/threat/threat.hpp"

#include <gtest/gtest.h>

using namespace specfence;
using namespace specfence::threat;
using ir::Label;

TEST( Vinst, Fig1Strong )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto v = compute_vinst( p, ThreatModel::Strong );
    EXPECT_EQ( v.label_set(), ( std::set< Label >{ 1, 2 } ) );
    EXPECT_EQ( v.labels.at( 1 ), VInstReason::StrongAllMemory );
}

TEST( Vinst, Fig1ClassicalOnlyNestedAccess )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto v = compute_vinst( p, ThreatModel::Classical );
    EXPECT_EQ( v.label_set(), ( std::set< Label >{ 2 } ) );
    EXPECT_EQ( v.labels.at( 2 ), VInstReason::TaintedIndex );
}

TEST( Vinst, NoInputsMeansNothingClassical )
{
    const auto p = ir::parse_program( "program t\nvar i : u8\nvar k : u8\narray a[4] : u8\narray b[4] : u8\n"
                                      "L0: k := load a[i]\nL1: k := load b[k]\nL2: halt\n" );
    EXPECT_FALSE( has_inputs( p ) );
    EXPECT_TRUE( compute_vinst( p, ThreatModel::Classical ).empty() );
    EXPECT_EQ( compute_vinst( p, ThreatModel::Strong ).size(), 2u );
}

TEST( Vinst, StoresAndLoadsOnly )
{
    const auto p = ir::parse_program( "program t\ninput i : u8\nvar k : u8\narray a[4] : u8\narray b[4] : u8\n"
                                      "L0: k := load a[i]\nL1: store b[k] := 1\nL2: halt\n" );
    EXPECT_EQ( compute_vinst( p, ThreatModel::Classical ).label_set(), ( std::set< Label >{ 1 } ) );
    EXPECT_TRUE( compute_vinst( p, ThreatModel::Classical, true ).empty() );
    EXPECT_EQ( compute_vinst( p, ThreatModel::Strong, true ).label_set(), ( std::set< Label >{ 0 } ) );
}

TEST( Taint, Fig1Map )
{
    const auto p = support::load_corpus( "fig1.sir" );
    const auto m = taint_map( p );
    EXPECT_EQ( m.before[ 0 ].tainted(), ( std::set< std::string >{ "i" } ) );
    EXPECT_EQ( m.after[ 1 ].tainted(), ( std::set< std::string >{ "i", "k" } ) );
    EXPECT_EQ( m.after[ 1 ].of( "k" ), Derived );
}

TEST( Taint, DirectPropagationAndStrongUpdate )
{
    const auto p = ir::parse_program( "program t\ninput in : u8\nvar x : u8\nvar y : u8\n"
                                      "L0: x := in\nL1: y := x + 1\nL2: x := 5\nL3: halt\n" );
    const auto m = taint_map( p );
    EXPECT_TRUE( m.after[ 1 ].tainted().contains( "y" ) );
    EXPECT_FALSE( m.after[ 2 ].tainted().contains( "x" ) );

    const auto q = ir::parse_program( "program t\nvar x : u8\nL0: x := 5\nL1: halt\n" );
    EXPECT_TRUE( taint_map( q ).after[ 0 ].tainted().empty() );
}

TEST( Taint, ArraysTaintedWholesaleThroughStores )
{
    const auto p = ir::parse_program( "program t\ninput i : u2\nvar x : u8\nvar k : u8\narray a[4] : u8\narray b[64] : u8\n"
                                      "L0: x := load a[i]\nL1: store a[0] := x\nL2: k := load a[1]\nL3: x := load b[k]\nL4: halt\n" );
    const auto m = taint_map( p );
    EXPECT_NE( m.after[ 1 ].of( "a" ) & Derived, 0 );
    EXPECT_NE( m.after[ 2 ].of( "k" ) & Derived, 0 );
    EXPECT_EQ( compute_vinst( p, ThreatModel::Classical ).label_set(), ( std::set< Label >{ 3 } ) );
}

TEST( Taint, JoinsAtMergePoints )
{
    const auto p = ir::parse_program( "program t\ninput i : u8\nvar x : u8\nvar k : u8\narray a[4] : u8\n"
                                      "L0: br (x < 3) L1 L2\nL1: x := i\nL2: k := load a[x]\nL3: halt\n" );
    const auto m = taint_map( p );
    EXPECT_EQ( m.before[ 2 ].of( "x" ), Attacker );
    EXPECT_EQ( m.after[ 2 ].of( "k" ), Derived );
}

TEST( Properties, ClassicalWithinStrong )
{
    support::ProgramGenerator gen( 21 );
    for ( int n = 0; n < 1000; ++n )
    {
        const auto p = gen.program( 3 + gen.pick( 12 ) );
        const auto strong = compute_vinst( p, ThreatModel::Strong ).label_set();
        const auto classical = compute_vinst( p, ThreatModel::Classical ).label_set();
        for ( Label l : classical )
            EXPECT_TRUE( strong.contains( l ) );
        for ( Label l : strong )
            EXPECT_TRUE( ir::memory_instructions( p ).contains( l ) );
    }
}

TEST( Properties, FixpointIndependentOfWorklistOrder )
{
    support::ProgramGenerator gen( 22 );
    for ( int n = 0; n < 1000; ++n )
    {
        const auto p = gen.program( 3 + gen.pick( 14 ) );
        const auto a = taint_map( p, WorklistOrder::Forward );
        const auto b = taint_map( p, WorklistOrder::Reverse );
        ASSERT_EQ( a.before, b.before ) << ir::print_program( p );
        ASSERT_EQ( a.after, b.after ) << ir::print_program( p );
    }
}
