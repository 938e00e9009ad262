#include "test_support.hpp"

#include "specfence/certificate/certificate.hpp"
#include "specfence/logic/explicit.hpp"
#include "specfence/repair/repair.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

using namespace specfence;
using certificate::Condition;
using encode::Placement;
using encode::TransitionSystem;
using logic::Cube;

namespace
{

// c : u2 counts up from 0 and wraps; Bad is c = 2.
TransitionSystem counter()
{
    TransitionSystem ts;
    ts.name = "counter";
    ts.state_vars.push_back( { "c", encode::VarKind::Data, 2 } );
    ts.init_values = { 0 };
    ts.declare_terms();
    const auto c = ts.state_term( 0 );
    ts.next = { logic::add( c, logic::constant( 1, 2 ) ) };
    ts.bad = logic::eq( c, logic::constant( 2, 2 ) );
    return ts;
}

certificate::CertificateInfo info_of( const std::string& name )
{
    return { name, "classical" };
}

repair::RepairResult fig1_repair()
{
    repair::RepairOptions o;
    o.threat = threat::ThreatModel::Classical;
    return repair::repair( support::load_corpus( "fig1.sir" ), o );
}

std::optional< std::string > z3_command()
{
    for ( const char* p : { "/usr/local/bin/z3", "/usr/bin/z3" } )
        if ( std::filesystem::exists( p ) )
            return std::string( p );
    return std::nullopt;
}

std::vector< std::vector< Cube > > single_mutations( const std::vector< Cube >& inv )
{
    std::vector< std::vector< Cube > > out;
    for ( std::size_t k = 0; k < inv.size(); ++k )
    {
        auto deleted = inv;
        deleted.erase( deleted.begin() + static_cast< std::ptrdiff_t >( k ) );
        out.push_back( deleted );
        for ( std::size_t i = 0; i < inv[ k ].size(); ++i )
        {
            auto lits = inv[ k ].lits();
            lits[ i ].value = !lits[ i ].value;
            auto flipped = inv;
            flipped[ k ] = Cube( lits );
            out.push_back( flipped );
        }
    }
    return out;
}

} // namespace

TEST( SExpr, RoundTrip )
{
    const std::string text = "; a comment\n(set-logic QF_BV)\n(declare-const x0 Bool)\n(assert (and x0 (not |q r|)))\n";
    EXPECT_EQ( certificate::print_script( certificate::parse_script( text ) ), text );
    const auto s = certificate::parse_script( "(a  (b\n c) ; inner\n )" );
    ASSERT_EQ( s.items.size(), 1u );
    EXPECT_EQ( certificate::print_sexpr( std::get< certificate::SExpr >( s.items[ 0 ] ) ), "(a (b c))" );
    EXPECT_THROW( certificate::parse_script( "(a (b)" ), certificate::ParseError );
    EXPECT_THROW( certificate::parse_script( "x)" ), certificate::ParseError );
}

TEST( Certificate, Fig1RepairPasses )
{
    const auto r = fig1_repair();
    const auto text = certificate::export_certificate( r.system, r.invariant_cubes, info_of( "fig1" ) );
    const auto res = certificate::check_certificate( text );
    EXPECT_TRUE( res.pass );
    EXPECT_FALSE( certificate::invariant_failure( r.system, r.invariant_cubes ).has_value() );
    // Deterministic and a fixed point of parse and print.
    EXPECT_EQ( text, certificate::export_certificate( r.system, r.invariant_cubes, info_of( "fig1" ) ) );
    EXPECT_EQ( certificate::print_script( certificate::parse_script( text ) ), text );
    EXPECT_NE( text.find( "; fences: then@L0" ), std::string::npos );
    // The formula form of the same invariant agrees.
    EXPECT_TRUE( certificate::check_certificate(
                         certificate::export_certificate( r.system, r.invariant, info_of( "fig1" ) ) )
                         .pass );
}

TEST( Certificate, TrueInvariantFailsSafety )
{
    repair::RepairOptions o;
    o.threat = threat::ThreatModel::Classical;
    const auto ts = repair::speculative_system( support::load_corpus( "fig1.sir" ), o );
    const auto text = certificate::export_certificate( ts, std::vector< Cube >{}, info_of( "fig1" ) );
    const auto res = certificate::check_certificate( text );
    EXPECT_FALSE( res.pass );
    EXPECT_EQ( res.failed, Condition::Safety );
    // The witness is a Bad state: pc is the all-ones code.
    const auto shown = certificate::render_witness( text, res.witness );
    EXPECT_NE( shown.find( "pc = " + std::to_string( ts.bottom_code() ) + "\n" ), std::string::npos ) << shown;
    EXPECT_EQ( certificate::invariant_failure( ts, {} ), Condition::Safety );
}

TEST( Certificate, NotBadOnCounterFailsConsecution )
{
    const auto ts = counter();
    const auto not_bad = logic::bv_not( ts.bad );
    const auto text = certificate::export_certificate( ts, not_bad, info_of( "counter" ) );
    const auto res = certificate::check_certificate( text );
    EXPECT_EQ( res.failed, Condition::Consecution );
    // The only step out of !Bad into Bad is c = 1 to c = 2.
    const auto shown = certificate::render_witness( text, res.witness );
    EXPECT_NE( shown.find( "c = 1\n" ), std::string::npos ) << shown;
    EXPECT_NE( shown.find( "c' = 2\n" ), std::string::npos ) << shown;
    // Cube form: the clause !(c = 2).
    const std::vector< Cube > cubes{ Cube( { { 0, false }, { 1, true } } ) };
    EXPECT_EQ( certificate::invariant_failure( ts, cubes ), Condition::Consecution );
    EXPECT_EQ( certificate::check_certificate( certificate::export_certificate( ts, cubes, info_of( "counter" ) ) ).failed,
               Condition::Consecution );
    // A clause excluding the initial state breaks initiation.
    EXPECT_EQ( certificate::invariant_failure( ts, { Cube( { { 0, false } } ) } ), Condition::Initiation );
}

TEST( Certificate, FalseBadStillChecksTheOtherConditions )
{
    auto ts = counter();
    ts.bad = logic::ff();
    EXPECT_TRUE( certificate::check_certificate( certificate::export_certificate( ts, logic::tt(), info_of( "c" ) ) ).pass );
    const auto bad_init = certificate::export_certificate( ts, logic::ff(), info_of( "c" ) );
    EXPECT_EQ( certificate::check_certificate( bad_init ).failed, Condition::Initiation );
}

TEST( Certificate, MalformedScripts )
{
    EXPECT_THROW( certificate::check_certificate( "(check-sat)" ), certificate::ParseError );
    EXPECT_THROW( certificate::check_certificate( "(assert q)(check-sat)(check-sat)(check-sat)" ),
                  certificate::ParseError );
    EXPECT_THROW( certificate::check_certificate( "(declare-const q Int)" ), certificate::ParseError );
    EXPECT_THROW( certificate::check_certificate_external( "(check-sat)", "/nonexistent/solver" ),
                  certificate::OracleError );
}

TEST( Certificate, MinimizedInvariantDetectsMutations )
{
    const auto r = fig1_repair();
    const auto small = certificate::minimize_invariant( r.system, r.invariant_cubes );
    EXPECT_LE( small.size(), r.invariant_cubes.size() );
    EXPECT_FALSE( certificate::invariant_failure( r.system, small ).has_value() );
    // Every deletion from a minimized invariant breaks it.
    for ( std::size_t k = 0; k < small.size(); ++k )
    {
        auto fewer = small;
        fewer.erase( fewer.begin() + static_cast< std::ptrdiff_t >( k ) );
        EXPECT_TRUE( certificate::invariant_failure( r.system, fewer ).has_value() );
    }
    // The solver-level check and the script checker agree on every mutant.
    for ( const auto& m : single_mutations( small ) )
    {
        const auto direct = certificate::invariant_failure( r.system, m );
        const auto via_text =
                certificate::check_certificate( certificate::export_certificate( r.system, m, info_of( "fig1" ) ) );
        EXPECT_EQ( direct, via_text.failed );
    }
    auto ts = counter();
    EXPECT_THROW( certificate::minimize_invariant( ts, {} ), std::invalid_argument );
}

TEST( Certificate, ExternalSolverAgrees )
{
    const auto z3 = z3_command();
    if ( !z3 )
        GTEST_SKIP() << "no external solver installed";
    const auto r = fig1_repair();
    const auto good = certificate::export_certificate( r.system, r.invariant_cubes, info_of( "fig1" ) );
    EXPECT_TRUE( certificate::check_certificate_external( good, *z3 ).pass );
    for ( const auto& m : single_mutations( certificate::minimize_invariant( r.system, r.invariant_cubes ) ) )
    {
        const auto text = certificate::export_certificate( r.system, m, info_of( "fig1" ) );
        EXPECT_EQ( certificate::check_certificate_external( text, *z3 ).failed,
                   certificate::check_certificate( text ).failed );
    }
    const auto ts = counter();
    const auto text = certificate::export_certificate( ts, logic::bv_not( ts.bad ), info_of( "counter" ) );
    EXPECT_EQ( certificate::check_certificate_external( text, *z3 ).failed, Condition::Consecution );
}

TEST( Properties, RepairCertificatesPass )
{
    support::ProgramGenerator gen( 99 );
    gen.asserts = false;
    int checked = 0;
    for ( int n = 0; n < 60; ++n )
    {
        const auto p = gen.program( 3 + gen.pick( 6 ) );
        repair::RepairOptions o;
        o.placement = static_cast< Placement >( gen.pick( 3 ) );
        o.incremental = gen.pick( 2 ) == 0;
        const auto r = repair::repair( p, o );
        const auto text = certificate::export_certificate( r.system, r.invariant_cubes, info_of( p.name ) );
        ASSERT_TRUE( certificate::check_certificate( text ).pass ) << ir::print_program( p );
        const auto small = certificate::minimize_invariant( r.system, r.invariant_cubes );
        EXPECT_TRUE(
                certificate::check_certificate( certificate::export_certificate( r.system, small, info_of( p.name ) ) )
                        .pass );
        ++checked;
    }
    EXPECT_EQ( checked, 60 );
}
