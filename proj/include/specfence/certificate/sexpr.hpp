#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace specfence::certificate
{

struct SExpr
{
    // An atom when list is empty and atom is not; "()" has neither.
    std::string atom;
    std::vector< SExpr > list;

    SExpr() = default;
    SExpr( std::string a ) : atom{ std::move( a ) } {}
    SExpr( const char* a ) : atom{ a } {}
    explicit SExpr( std::vector< SExpr > l ) : list( std::move( l ) ) {}

    [[nodiscard]] bool is_atom() const { return !atom.empty(); }
    [[nodiscard]] bool is( std::string_view a ) const { return atom == a; }
    [[nodiscard]] const SExpr& operator[]( std::size_t i ) const { return list.at( i ); }
    [[nodiscard]] std::size_t size() const { return list.size(); }

    friend bool operator==( const SExpr&, const SExpr& ) = default;
};

// A top-level item: a command or a comment line (without the leading ';').
struct Comment
{
    std::string text;
    friend bool operator==( const Comment&, const Comment& ) = default;
};

using Item = std::variant< Comment, SExpr >;

struct Script
{
    std::vector< Item > items;
};

class ParseError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

Script parse_script( std::string_view text );

std::string print_sexpr( const SExpr& e );
// One item per line; the canonical form parse_script reads back unchanged.
std::string print_script( const Script& s );

} // namespace specfence::certificate
