#include "specfence/certificate/certificate.hpp"

#include "specfence/logic/aig.hpp"
#include "specfence/logic/sat_solver.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <unistd.h>

namespace specfence::certificate
{

using logic::AigLit;
namespace sat = logic::sat;

namespace
{

// Interprets the Bool fragment of SMT-LIB2 used by certificates.
class Interpreter
{
    struct Function
    {
        std::vector< std::string > params;
        SExpr body;
    };

    logic::Aig _aig;
    std::map< std::string, AigLit > _consts;
    std::vector< std::string > _declared;
    std::map< std::string, AigLit > _defined;
    std::map< std::string, Function > _functions;
    std::vector< std::vector< AigLit > > _assertions{ {} };

public:
    struct Answer
    {
        bool sat;
        std::map< std::string, bool > model;
    };

    std::vector< Answer > answers;

    [[noreturn]] static void fail( const std::string& message ) { throw ParseError( "certificate: " + message ); }

    AigLit eval( const SExpr& e, const std::map< std::string, AigLit >& scope )
    {
        if ( e.is_atom() )
        {
            if ( e.is( "true" ) )
                return logic::aig_true;
            if ( e.is( "false" ) )
                return logic::aig_false;
            if ( auto it = scope.find( e.atom ); it != scope.end() )
                return it->second;
            if ( auto it = _consts.find( e.atom ); it != _consts.end() )
                return it->second;
            if ( auto it = _defined.find( e.atom ); it != _defined.end() )
                return it->second;
            fail( "unknown symbol '" + e.atom + "'" );
        }
        if ( e.list.empty() || !e[ 0 ].is_atom() )
            fail( "malformed term " + print_sexpr( e ) );
        const std::string& op = e[ 0 ].atom;
        std::vector< AigLit > args;
        for ( std::size_t i = 1; i < e.size(); ++i )
            args.push_back( eval( e[ i ], scope ) );
        auto need = [ & ]( std::size_t n ) {
            if ( args.size() < n )
                fail( "'" + op + "' needs at least " + std::to_string( n ) + " arguments" );
        };
        if ( op == "not" )
        {
            if ( args.size() != 1 )
                fail( "'not' takes one argument" );
            return ~args[ 0 ];
        }
        if ( op == "and" || op == "or" )
        {
            need( 1 );
            AigLit acc = args[ 0 ];
            for ( std::size_t i = 1; i < args.size(); ++i )
                acc = op == "and" ? _aig.make_and( acc, args[ i ] ) : _aig.make_or( acc, args[ i ] );
            return acc;
        }
        if ( op == "xor" )
        {
            need( 2 );
            AigLit acc = args[ 0 ];
            for ( std::size_t i = 1; i < args.size(); ++i )
                acc = _aig.make_xor( acc, args[ i ] );
            return acc;
        }
        if ( op == "=>" )
        {
            need( 2 );
            AigLit acc = args.back();
            for ( std::size_t i = args.size() - 1; i-- > 0; )
                acc = _aig.make_or( ~args[ i ], acc );
            return acc;
        }
        if ( op == "=" || op == "distinct" )
        {
            need( 2 );
            AigLit acc = logic::aig_true;
            for ( std::size_t i = 1; i < args.size(); ++i )
                for ( std::size_t j = op == "=" ? i - 1 : 0; j < i; ++j )
                    acc = _aig.make_and( acc, op == "=" ? _aig.make_xnor( args[ j ], args[ i ] )
                                                        : _aig.make_xor( args[ j ], args[ i ] ) );
            return acc;
        }
        if ( op == "ite" )
        {
            if ( args.size() != 3 )
                fail( "'ite' takes three arguments" );
            return _aig.make_ite( args[ 0 ], args[ 1 ], args[ 2 ] );
        }
        if ( auto it = _functions.find( op ); it != _functions.end() )
        {
            if ( args.size() != it->second.params.size() )
                fail( "wrong number of arguments to '" + op + "'" );
            std::map< std::string, AigLit > inner;
            for ( std::size_t i = 0; i < args.size(); ++i )
                inner[ it->second.params[ i ] ] = args[ i ];
            return eval( it->second.body, inner );
        }
        fail( "unsupported operator '" + op + "'" );
    }

    void bind( const std::string& name )
    {
        if ( _consts.contains( name ) || _defined.contains( name ) || _functions.contains( name ) )
            fail( "symbol '" + name + "' declared twice" );
    }

    void check_sat()
    {
        sat::Solver solver;
        logic::CnfEmitter cnf( _aig, solver );
        for ( const auto& level : _assertions )
            for ( const auto& a : level )
                solver.add_clause( { cnf.lit( a ) } );
        Answer answer{ solver.solve() == sat::Result::Sat, {} };
        if ( answer.sat )
            for ( const auto& name : _declared )
            {
                const auto l = _consts.at( name );
                const auto v = cnf.var_of_node( l.node() );
                answer.model[ name ] = v >= 0 && solver.model_true( sat::Lit::make( v ) );
            }
        answers.push_back( std::move( answer ) );
    }

    void run( const SExpr& c )
    {
        if ( c.list.empty() || !c[ 0 ].is_atom() )
            fail( "malformed command " + print_sexpr( c ) );
        const std::string& cmd = c[ 0 ].atom;
        if ( cmd == "set-logic" || cmd == "set-info" || cmd == "set-option" || cmd == "exit" || cmd == "get-model" )
            return;
        if ( cmd == "declare-const" || cmd == "declare-fun" )
        {
            const bool fun = cmd == "declare-fun";
            if ( c.size() != ( fun ? 4u : 3u ) || !c[ 1 ].is_atom() || !c[ c.size() - 1 ].is( "Bool" ) ||
                 ( fun && !c[ 2 ].list.empty() ) )
                fail( "only Bool constants may be declared: " + print_sexpr( c ) );
            bind( c[ 1 ].atom );
            _consts[ c[ 1 ].atom ] = _aig.make_input();
            _declared.push_back( c[ 1 ].atom );
            return;
        }
        if ( cmd == "define-fun" )
        {
            if ( c.size() != 5 || !c[ 1 ].is_atom() || c[ 2 ].is_atom() || !c[ 3 ].is( "Bool" ) )
                fail( "malformed define-fun: " + print_sexpr( c ) );
            bind( c[ 1 ].atom );
            if ( c[ 2 ].list.empty() )
            {
                _defined[ c[ 1 ].atom ] = eval( c[ 4 ], {} );
                return;
            }
            Function f{ {}, c[ 4 ] };
            for ( const auto& p : c[ 2 ].list )
            {
                if ( p.size() != 2 || !p[ 0 ].is_atom() || !p[ 1 ].is( "Bool" ) )
                    fail( "only Bool parameters are supported" );
                f.params.push_back( p[ 0 ].atom );
            }
            _functions[ c[ 1 ].atom ] = std::move( f );
            return;
        }
        if ( cmd == "assert" )
        {
            if ( c.size() != 2 )
                fail( "assert takes one term" );
            _assertions.back().push_back( eval( c[ 1 ], {} ) );
            return;
        }
        if ( cmd == "push" || cmd == "pop" )
        {
            const int n = c.size() == 1 ? 1 : std::stoi( c[ 1 ].atom );
            for ( int i = 0; i < n; ++i )
            {
                if ( cmd == "push" )
                    _assertions.emplace_back();
                else if ( _assertions.size() > 1 )
                    _assertions.pop_back();
                else
                    fail( "pop without push" );
            }
            return;
        }
        if ( cmd == "check-sat" )
        {
            check_sat();
            return;
        }
        fail( "unsupported command '" + cmd + "'" );
    }
};

CheckResult verdict( const std::vector< bool >& sat, std::map< std::string, bool > witness = {} )
{
    if ( sat.size() != 3 )
        throw ParseError( "certificate: expected three checks, found " + std::to_string( sat.size() ) );
    CheckResult r;
    for ( std::size_t i = 0; i < 3; ++i )
        if ( sat[ i ] )
        {
            r.failed = static_cast< Condition >( i + 1 );
            r.witness = std::move( witness );
            return r;
        }
    r.pass = true;
    return r;
}

} // namespace

std::string to_string( Condition c )
{
    switch ( c )
    {
    case Condition::Initiation: return "(i) Init -> Inv";
    case Condition::Consecution: return "(ii) Inv & Tr -> Inv'";
    case Condition::Safety: return "(iii) Inv -> !Bad";
    }
    return "?";
}

CheckResult check_certificate( std::string_view text )
{
    const Script s = parse_script( text );
    Interpreter in;
    for ( const auto& item : s.items )
        if ( const auto* e = std::get_if< SExpr >( &item ) )
            in.run( *e );
    std::vector< bool > sat;
    std::map< std::string, bool > witness;
    for ( auto& a : in.answers )
    {
        if ( a.sat && witness.empty() )
            witness = std::move( a.model );
        sat.push_back( a.sat );
    }
    return verdict( sat, std::move( witness ) );
}

CheckResult check_certificate_external( std::string_view text, const std::string& command )
{
    char path[] = "/tmp/specfence-cert-XXXXXX";
    const int fd = mkstemp( path );
    if ( fd < 0 )
        throw OracleError( "certificate: cannot create a temporary file" );
    close( fd );
    {
        std::ofstream out( path );
        out << text;
    }
    const std::string full = command + " " + path + " 2>&1";
    FILE* pipe = popen( full.c_str(), "r" );
    if ( !pipe )
    {
        std::filesystem::remove( path );
        throw OracleError( "certificate: cannot run '" + command + "'" );
    }
    std::string output;
    char buf[ 4096 ];
    while ( const auto n = fread( buf, 1, sizeof buf, pipe ) )
        output.append( buf, n );
    pclose( pipe );
    std::filesystem::remove( path );

    std::vector< bool > sat;
    std::istringstream lines( output );
    for ( std::string line; std::getline( lines, line ); )
    {
        while ( !line.empty() && std::isspace( static_cast< unsigned char >( line.back() ) ) )
            line.pop_back();
        if ( line == "sat" || line == "unsat" )
            sat.push_back( line == "sat" );
        else if ( !line.empty() )
            throw OracleError( "certificate: solver said: " + line );
    }
    if ( sat.size() != 3 )
        throw OracleError( "certificate: expected three answers from '" + command + "', got " +
                           std::to_string( sat.size() ) );
    return verdict( sat );
}

std::string render_witness( std::string_view text, const std::map< std::string, bool >& witness )
{
    static const std::regex entry( R"(^ (state|input) ([xu])(\d+)(?:\.\.[xu](\d+))? = (.+)$)" );
    std::ostringstream os;
    for ( const auto& item : parse_script( text ).items )
    {
        const auto* c = std::get_if< Comment >( &item );
        std::smatch m;
        if ( !c || !std::regex_match( c->text, m, entry ) )
            continue;
        const std::size_t first = std::stoul( m[ 3 ] );
        const std::size_t last = m[ 4 ].matched ? std::stoul( m[ 4 ] ) : first;
        const char prefix = m[ 2 ].str()[ 0 ];
        for ( const char p : { prefix, prefix == 'x' ? 'y' : '\0' } )
        {
            if ( !p )
                continue;
            std::uint64_t value = 0;
            bool known = false;
            for ( std::size_t b = first; b <= last; ++b )
                if ( auto it = witness.find( std::string( 1, p ) + std::to_string( b ) ); it != witness.end() )
                {
                    known = true;
                    value |= static_cast< std::uint64_t >( it->second ) << ( b - first );
                }
            if ( known )
                os << m[ 5 ].str() << ( p == 'y' ? "'" : "" ) << " = " << value << "\n";
        }
    }
    return os.str();
}

} // namespace specfence::certificate
