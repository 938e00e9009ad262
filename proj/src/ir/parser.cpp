#include "specfence/ir/program.hpp"

#include "specfence/logic/term.hpp"

#include <cctype>
#include <charconv>
#include <map>

namespace specfence::ir
{

namespace
{

enum class Tok
{
    Ident,
    Number,
    Sym,
    End,
};

struct Token
{
    Tok kind;
    std::string text;
    std::uint64_t value = 0;
    int column = 0;
};

std::vector< Token > tokenize( std::string_view line, int line_no )
{
    static const char* const symbols[] = { ":=", "==", "<=", ":", "[", "]", "(", ")", ",", "+", "-",
                                           "*",  "&",  "|",  "^", "~", "<", ">" };
    std::vector< Token > out;
    std::size_t i = 0;
    while ( i < line.size() )
    {
        const char c = line[ i ];
        const int col = static_cast< int >( i ) + 1;
        if ( std::isspace( static_cast< unsigned char >( c ) ) )
        {
            ++i;
            continue;
        }
        if ( std::isalpha( static_cast< unsigned char >( c ) ) || c == '_' )
        {
            std::size_t j = i;
            while ( j < line.size() &&
                    ( std::isalnum( static_cast< unsigned char >( line[ j ] ) ) || line[ j ] == '_' ) )
                ++j;
            out.push_back( { Tok::Ident, std::string( line.substr( i, j - i ) ), 0, col } );
            i = j;
            continue;
        }
        if ( std::isdigit( static_cast< unsigned char >( c ) ) )
        {
            std::size_t j = i;
            int base = 10;
            if ( c == '0' && i + 1 < line.size() && ( line[ i + 1 ] == 'x' || line[ i + 1 ] == 'X' ) )
            {
                base = 16;
                j += 2;
            }
            const std::size_t digits = j;
            while ( j < line.size() && std::isxdigit( static_cast< unsigned char >( line[ j ] ) ) )
                ++j;
            std::uint64_t value = 0;
            auto [ ptr, ec ] = std::from_chars( line.data() + digits, line.data() + j, value, base );
            if ( ec != std::errc{} || ptr != line.data() + j || digits == j )
                throw ParseError( line_no, col, "malformed number '" + std::string( line.substr( i, j - i ) ) + "'" );
            out.push_back( { Tok::Number, std::string( line.substr( i, j - i ) ), value, col } );
            i = j;
            continue;
        }
        bool matched = false;
        for ( const char* s : symbols )
        {
            const std::string_view sv{ s };
            if ( line.substr( i, sv.size() ) == sv )
            {
                out.push_back( { Tok::Sym, std::string( sv ), 0, col } );
                i += sv.size();
                matched = true;
                break;
            }
        }
        if ( !matched )
            throw ParseError( line_no, col, std::string( "unexpected character '" ) + c + "'" );
    }
    out.push_back( { Tok::End, "", 0, static_cast< int >( line.size() ) + 1 } );
    return out;
}

// Untyped expression as written; widths are resolved afterwards.
struct Raw
{
    ExprKind kind;
    std::string name;
    std::uint64_t value = 0;
    unsigned width = 0; // zext/trunc target
    int column = 0;
    std::vector< Raw > args;
};

class LineParser
{
public:
    LineParser( std::vector< Token > toks, int line_no ) : _toks{ std::move( toks ) }, _line{ line_no } {}

    const Token& peek() const { return _toks[ _pos ]; }
    bool at_end() const { return peek().kind == Tok::End; }

    [[noreturn]] void fail( const std::string& msg ) const { throw ParseError( _line, peek().column, msg ); }

    bool accept( std::string_view sym )
    {
        if ( peek().kind == Tok::Sym && peek().text == sym )
        {
            ++_pos;
            return true;
        }
        return false;
    }

    void expect( std::string_view sym )
    {
        if ( !accept( sym ) )
            fail( "expected '" + std::string( sym ) + "'" + found() );
    }

    std::string found() const { return at_end() ? ", found end of line" : ", found '" + peek().text + "'"; }

    bool accept_keyword( std::string_view kw )
    {
        if ( peek().kind == Tok::Ident && peek().text == kw )
        {
            ++_pos;
            return true;
        }
        return false;
    }

    std::string ident( const char* what )
    {
        if ( peek().kind != Tok::Ident )
            fail( std::string( "expected " ) + what + found() );
        return _toks[ _pos++ ].text;
    }

    std::uint64_t number( const char* what )
    {
        if ( peek().kind != Tok::Number )
            fail( std::string( "expected " ) + what + found() );
        return _toks[ _pos++ ].value;
    }

    unsigned width_type()
    {
        const int col = peek().column;
        const std::string t = ident( "a type u<width>" );
        unsigned w = 0;
        if ( t.size() < 2 || t[ 0 ] != 'u' ||
             std::from_chars( t.data() + 1, t.data() + t.size(), w ).ptr != t.data() + t.size() )
            throw ParseError( _line, col, "expected a type u<width>, found '" + t + "'" );
        if ( w == 0 || w > logic::max_width )
            throw ParseError( _line, col, "width must be in 1..64" );
        return w;
    }

    Label label()
    {
        const int col = peek().column;
        const std::string t = ident( "a label" );
        Label l = 0;
        if ( t.size() < 2 || t[ 0 ] != 'L' ||
             std::from_chars( t.data() + 1, t.data() + t.size(), l ).ptr != t.data() + t.size() )
            throw ParseError( _line, col, "expected a label L<k>, found '" + t + "'" );
        return l;
    }

    void finish()
    {
        if ( !at_end() )
            fail( "unexpected '" + peek().text + "' at end of line" );
    }

    Raw expr() { return cmp(); }

private:
    Raw binary( ExprKind k, Raw a, Raw b, int col )
    {
        Raw r{ k, {}, 0, 0, col, {} };
        r.args.push_back( std::move( a ) );
        r.args.push_back( std::move( b ) );
        return r;
    }

    Raw cmp()
    {
        Raw a = bor();
        const int col = peek().column;
        if ( accept( "==" ) )
            return binary( ExprKind::Eq, std::move( a ), bor(), col );
        if ( accept( "<=" ) )
            return binary( ExprKind::Ule, std::move( a ), bor(), col );
        if ( accept( "<" ) )
            return binary( ExprKind::Ult, std::move( a ), bor(), col );
        return a;
    }

    Raw bor()
    {
        Raw a = bxor();
        for ( int col = peek().column; accept( "|" ); col = peek().column )
            a = binary( ExprKind::Or, std::move( a ), bxor(), col );
        return a;
    }

    Raw bxor()
    {
        Raw a = band();
        for ( int col = peek().column; accept( "^" ); col = peek().column )
            a = binary( ExprKind::Xor, std::move( a ), band(), col );
        return a;
    }

    Raw band()
    {
        Raw a = sum();
        for ( int col = peek().column; accept( "&" ); col = peek().column )
            a = binary( ExprKind::And, std::move( a ), sum(), col );
        return a;
    }

    Raw sum()
    {
        Raw a = product();
        while ( true )
        {
            const int col = peek().column;
            if ( accept( "+" ) )
                a = binary( ExprKind::Add, std::move( a ), product(), col );
            else if ( accept( "-" ) )
                a = binary( ExprKind::Sub, std::move( a ), product(), col );
            else
                return a;
        }
    }

    Raw product()
    {
        Raw a = unary();
        for ( int col = peek().column; accept( "*" ); col = peek().column )
            a = binary( ExprKind::Mul, std::move( a ), unary(), col );
        return a;
    }

    Raw unary()
    {
        const int col = peek().column;
        if ( accept( "~" ) )
        {
            Raw r{ ExprKind::Not, {}, 0, 0, col, {} };
            r.args.push_back( unary() );
            return r;
        }
        return primary();
    }

    Raw primary()
    {
        const int col = peek().column;
        if ( accept( "(" ) )
        {
            Raw r = expr();
            expect( ")" );
            return r;
        }
        if ( peek().kind == Tok::Number )
            return Raw{ ExprKind::Const, {}, number( "a constant" ), 0, col, {} };
        if ( peek().kind != Tok::Ident )
            fail( "expected an expression" + found() );
        const std::string id = ident( "an identifier" );
        if ( id == "ite" && peek().kind == Tok::Sym && peek().text == "(" )
        {
            expect( "(" );
            Raw r{ ExprKind::Ite, {}, 0, 0, col, {} };
            r.args.push_back( expr() );
            expect( "," );
            r.args.push_back( expr() );
            expect( "," );
            r.args.push_back( expr() );
            expect( ")" );
            return r;
        }
        if ( ( id == "zext" || id == "trunc" ) && peek().kind == Tok::Sym && peek().text == "<" )
        {
            expect( "<" );
            const int wcol = peek().column;
            const std::uint64_t w = number( "a width" );
            if ( w == 0 || w > logic::max_width )
                throw ParseError( _line, wcol, "width must be in 1..64" );
            expect( ">" );
            expect( "(" );
            Raw r{ id == "zext" ? ExprKind::Zext : ExprKind::Trunc, {}, 0, static_cast< unsigned >( w ), col, {} };
            r.args.push_back( expr() );
            expect( ")" );
            return r;
        }
        return Raw{ ExprKind::Var, id, 0, 0, col, {} };
    }

    std::vector< Token > _toks;
    std::size_t _pos = 0;
    int _line;
};

// Resolves the widths of a raw expression. Constants take their width from
// context; an expression built only from constants has no natural width.
class Typer
{
public:
    Typer( const std::map< std::string, unsigned >& vars, const std::set< std::string >& arrays, Label at )
            : _vars{ vars }, _arrays{ arrays }, _at{ at }
    {
    }

    std::optional< unsigned > natural( const Raw& r ) const
    {
        switch ( r.kind )
        {
        case ExprKind::Var: return width_of( r.name );
        case ExprKind::Const: return std::nullopt;
        case ExprKind::Eq:
        case ExprKind::Ult:
        case ExprKind::Ule: return 1u;
        case ExprKind::Zext:
        case ExprKind::Trunc: return r.width;
        case ExprKind::Not: return natural( r.args[ 0 ] );
        case ExprKind::Ite: {
            auto w = natural( r.args[ 1 ] );
            return w ? w : natural( r.args[ 2 ] );
        }
        default: {
            auto w = natural( r.args[ 0 ] );
            return w ? w : natural( r.args[ 1 ] );
        }
        }
    }

    ExprPtr typed( const Raw& r, unsigned w ) const
    {
        switch ( r.kind )
        {
        case ExprKind::Var: {
            const unsigned vw = width_of( r.name );
            if ( vw != w )
                fail( "variable '" + r.name + "' has width " + std::to_string( vw ) + " but width " +
                      std::to_string( w ) + " is required" );
            return make_var( r.name, w );
        }
        case ExprKind::Const:
            if ( ( r.value & ~logic::width_mask( w ) ) != 0 )
                fail( "constant " + std::to_string( r.value ) + " does not fit in " + std::to_string( w ) + " bits" );
            return make_const( r.value, w );
        case ExprKind::Eq:
        case ExprKind::Ult:
        case ExprKind::Ule: {
            require_bool( w, r );
            const auto ow = operand_width( r.args[ 0 ], r.args[ 1 ] );
            return make_expr( r.kind, 1, { typed( r.args[ 0 ], ow ), typed( r.args[ 1 ], ow ) } );
        }
        case ExprKind::Ite:
            return make_expr( r.kind, w, { typed( r.args[ 0 ], 1 ), typed( r.args[ 1 ], w ), typed( r.args[ 2 ], w ) } );
        case ExprKind::Zext:
        case ExprKind::Trunc: {
            if ( r.width != w )
                fail( std::string( r.kind == ExprKind::Zext ? "zext" : "trunc" ) + " produces width " +
                      std::to_string( r.width ) + " but width " + std::to_string( w ) + " is required" );
            const auto inner = natural( r.args[ 0 ] );
            if ( !inner )
                fail( "cannot infer the width of a constant operand" );
            if ( r.kind == ExprKind::Zext ? *inner > w : *inner < w )
                fail( std::string( r.kind == ExprKind::Zext ? "zext" : "trunc" ) + " from width " +
                      std::to_string( *inner ) + " to width " + std::to_string( w ) );
            return make_expr( r.kind, w, { typed( r.args[ 0 ], *inner ) } );
        }
        case ExprKind::Not: return make_expr( r.kind, w, { typed( r.args[ 0 ], w ) } );
        default: return make_expr( r.kind, w, { typed( r.args[ 0 ], w ), typed( r.args[ 1 ], w ) } );
        }
    }

    // Types an expression whose width is dictated by its use.
    ExprPtr at_width( const Raw& r, unsigned w ) const
    {
        return typed( r, w );
    }

    // Types an array index: its own width if it has one, otherwise the
    // narrowest width holding both the index domain and the constant.
    ExprPtr index( const Raw& r, unsigned length ) const
    {
        if ( auto w = natural( r ) )
            return typed( r, *w );
        unsigned w = index_width( length );
        while ( w < logic::max_width && ( r.value >> w ) != 0 )
            ++w;
        return typed( r, w );
    }

private:
    [[noreturn]] void fail( const std::string& msg ) const { throw ValidationError( _at, msg ); }

    void require_bool( unsigned w, const Raw& ) const
    {
        if ( w != 1 )
            fail( "comparison yields 1 bit but width " + std::to_string( w ) + " is required" );
    }

    unsigned operand_width( const Raw& a, const Raw& b ) const
    {
        auto w = natural( a );
        if ( !w )
            w = natural( b );
        if ( !w )
            fail( "cannot infer the width of a comparison between constants" );
        return *w;
    }

    unsigned width_of( const std::string& name ) const
    {
        auto it = _vars.find( name );
        if ( it == _vars.end() )
            fail( _arrays.contains( name ) ? "array '" + name + "' used as a scalar" : "undeclared variable '" + name + "'" );
        return it->second;
    }

    const std::map< std::string, unsigned >& _vars;
    const std::set< std::string >& _arrays;
    Label _at;
};

struct PendingInst
{
    int line;
    Label label;
    std::vector< Token > toks;
};

std::string_view strip_comment( std::string_view line )
{
    if ( auto pos = line.find( '#' ); pos != std::string_view::npos )
        line = line.substr( 0, pos );
    return line;
}

Instruction parse_instruction( const PendingInst& pi, const Program& p, const Typer& typer )
{
    LineParser lp( pi.toks, pi.line );
    lp.label();
    lp.expect( ":" );
    Instruction inst;
    if ( lp.accept_keyword( "br" ) )
    {
        Raw c = lp.expr();
        Label t = lp.label();
        Label e = lp.label();
        inst = CondBranch{ typer.at_width( c, 1 ), t, e };
    }
    else if ( lp.accept_keyword( "goto" ) )
        inst = Goto{ lp.label() };
    else if ( lp.accept_keyword( "store" ) )
    {
        const std::string arr = lp.ident( "an array name" );
        lp.expect( "[" );
        Raw idx = lp.expr();
        lp.expect( "]" );
        lp.expect( ":=" );
        Raw val = lp.expr();
        const auto* a = p.find_array( arr );
        if ( a == nullptr )
            throw ValidationError( pi.label, "store into undeclared array '" + arr + "'" );
        inst = Store{ arr, typer.index( idx, a->length ), typer.at_width( val, a->elem_width ) };
    }
    else if ( lp.accept_keyword( "assume" ) )
        inst = Assume{ typer.at_width( lp.expr(), 1 ) };
    else if ( lp.accept_keyword( "assert" ) )
        inst = Assert{ typer.at_width( lp.expr(), 1 ) };
    else if ( lp.accept_keyword( "halt" ) )
        inst = Halt{};
    else
    {
        const std::string dest = lp.ident( "an instruction" );
        lp.expect( ":=" );
        const auto* d = p.find_var( dest );
        if ( lp.accept_keyword( "load" ) )
        {
            const std::string arr = lp.ident( "an array name" );
            lp.expect( "[" );
            Raw idx = lp.expr();
            lp.expect( "]" );
            lp.finish();
            const auto* a = p.find_array( arr );
            if ( a == nullptr )
                throw ValidationError( pi.label, "load from undeclared array '" + arr + "'" );
            if ( d == nullptr )
                throw ValidationError( pi.label, "load into undeclared variable '" + dest + "'" );
            return Load{ dest, arr, typer.index( idx, a->length ) };
        }
        Raw val = lp.expr();
        lp.finish();
        if ( d == nullptr )
            throw ValidationError( pi.label, "assignment to undeclared variable '" + dest + "'" );
        return Assign{ dest, typer.at_width( val, d->width ) };
    }
    lp.finish();
    return inst;
}

} // namespace

Program parse_program( std::string_view text )
{
    Program p;
    bool have_name = false;
    std::vector< PendingInst > pending;
    int line_no = 0;
    int last_line = 0;

    std::size_t start = 0;
    while ( start <= text.size() )
    {
        std::size_t end = text.find( '\n', start );
        if ( end == std::string_view::npos )
            end = text.size();
        std::string_view line = strip_comment( text.substr( start, end - start ) );
        if ( !line.empty() && line.back() == '\r' )
            line.remove_suffix( 1 );
        ++line_no;
        start = end + 1;

        auto toks = tokenize( line, line_no );
        if ( toks.front().kind == Tok::End )
            continue;
        last_line = line_no;
        LineParser lp( toks, line_no );
        const Token first = lp.peek();
        if ( first.kind == Tok::Ident && first.text == "program" )
        {
            if ( have_name )
                throw ParseError( line_no, first.column, "duplicate program header" );
            if ( !pending.empty() || !p.vars.empty() || !p.arrays.empty() )
                throw ParseError( line_no, first.column, "program header must come first" );
            lp.accept_keyword( "program" );
            p.name = lp.ident( "a program name" );
            lp.finish();
            have_name = true;
            continue;
        }
        if ( !have_name )
            throw ParseError( line_no, first.column, "expected 'program <name>'" );
        if ( first.kind == Tok::Ident && ( first.text == "var" || first.text == "input" || first.text == "array" ) )
        {
            if ( !pending.empty() )
                throw ParseError( line_no, first.column, "declarations must precede instructions" );
            lp.accept_keyword( first.text );
            const std::string name = lp.ident( "a name" );
            if ( first.text == "array" )
            {
                lp.expect( "[" );
                const int col = lp.peek().column;
                const std::uint64_t len = lp.number( "an array length" );
                if ( len == 0 || len > 64 )
                    throw ParseError( line_no, col, "array length must be in 1..64" );
                lp.expect( "]" );
                lp.expect( ":" );
                p.arrays.push_back( { name, static_cast< unsigned >( len ), lp.width_type() } );
            }
            else
            {
                lp.expect( ":" );
                p.vars.push_back( { name, lp.width_type(), first.text == "input" } );
            }
            lp.finish();
            continue;
        }
        // Instruction: label first, checked for density here.
        const Label l = lp.label();
        if ( l != pending.size() )
            throw ParseError( line_no, first.column,
                              "expected label " + label_name( static_cast< Label >( pending.size() ) ) + ", found " +
                                      label_name( l ) );
        lp.expect( ":" );
        if ( lp.at_end() )
            lp.fail( "expected an instruction" );
        pending.push_back( { line_no, l, std::move( toks ) } );
    }
    if ( !have_name )
        throw ParseError( last_line == 0 ? 1 : last_line, 1, "expected 'program <name>'" );
    if ( pending.empty() )
        throw ParseError( last_line == 0 ? 1 : last_line, 1, "program has no instructions" );

    std::map< std::string, unsigned > vars;
    std::set< std::string > arrays;
    for ( const auto& v : p.vars )
        if ( !vars.emplace( v.name, v.width ).second )
            throw ValidationError( std::nullopt, "duplicate declaration of '" + v.name + "'" );
    for ( const auto& a : p.arrays )
        if ( vars.contains( a.name ) || !arrays.insert( a.name ).second )
            throw ValidationError( std::nullopt, "duplicate declaration of '" + a.name + "'" );

    for ( const auto& pi : pending )
    {
        Typer typer( vars, arrays, pi.label );
        p.insts.push_back( parse_instruction( pi, p, typer ) );
        p.lines.push_back( pi.line );
    }
    validate( p );
    return p;
}

} // namespace specfence::ir
