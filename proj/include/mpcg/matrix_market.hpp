#ifndef MPCG_MATRIX_MARKET_HPP
#define MPCG_MATRIX_MARKET_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "sparse.hpp"

namespace mpcg {

namespace detail {

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

template <typename Number>
Number parse_number(std::string_view token, std::size_t line_no) {
    Number value{};
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(line_no, "cannot parse '" + std::string(token) + "'");
    return value;
}

} // namespace detail

/**
 * Reads a real (or integer) coordinate Matrix Market stream.
 *
 * Symmetric headers store one triangle and are mirrored; general headers must
 * already list both halves with identical values.
 */
inline SparseSymMatrix read_matrix_market(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError(1, "empty input");
    ++line_no;
    const std::string lowered = detail::lowercase(line);
    const auto header = detail::split_ws(lowered);
    if (header.size() != 5 || header[0] != "%%matrixmarket" || header[1] != "matrix" ||
        header[2] != "coordinate")
        throw ParseError(line_no, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'");
    if (header[3] != "real" && header[3] != "integer")
        throw ParseError(line_no, "unsupported field '" + std::string(header[3]) + "'");
    Mirror mirror;
    if (header[4] == "symmetric")
        mirror = Mirror::yes;
    else if (header[4] == "general")
        mirror = Mirror::no;
    else
        throw ParseError(line_no, "unsupported symmetry '" + std::string(header[4]) + "'");

    std::size_t rows = 0, cols = 0, entries = 0;
    bool have_size = false;
    std::vector<Triplet> triplets;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = detail::split_ws(line);
        if (tokens.empty() || tokens.front().front() == '%') continue;
        if (!have_size) {
            if (tokens.size() != 3) throw ParseError(line_no, "expected 'rows cols entries'");
            rows = detail::parse_number<std::size_t>(tokens[0], line_no);
            cols = detail::parse_number<std::size_t>(tokens[1], line_no);
            entries = detail::parse_number<std::size_t>(tokens[2], line_no);
            if (rows != cols || rows == 0)
                throw ParseError(line_no, "matrix must be square and nonempty");
            triplets.reserve(entries);
            have_size = true;
            continue;
        }
        if (tokens.size() != 3) throw ParseError(line_no, "expected 'row col value'");
        if (triplets.size() == entries) throw ParseError(line_no, "more entries than declared");
        const auto i = detail::parse_number<std::size_t>(tokens[0], line_no);
        const auto j = detail::parse_number<std::size_t>(tokens[1], line_no);
        const auto v = detail::parse_number<double>(tokens[2], line_no);
        if (i == 0 || j == 0 || i > rows || j > cols)
            throw ParseError(line_no, "index out of range");
        triplets.push_back({i - 1, j - 1, v});
    }
    if (!have_size) throw ParseError(line_no, "missing size line");
    if (triplets.size() != entries)
        throw ParseError(line_no, "declared " + std::to_string(entries) + " entries, found " +
                                      std::to_string(triplets.size()));
    return from_coordinates<double>(triplets, rows, mirror);
}

inline SparseSymMatrix read_matrix_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return read_matrix_market(in);
}

/// Writes the lower triangle under a symmetric header, values at 17 significant digits.
inline void write_matrix_market(const SparseSymMatrix& a, std::ostream& out) {
    std::size_t lower = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j : a.row_cols(i)) lower += (j <= i);

    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << a.size() << ' ' << a.size() << ' ' << lower << '\n';
    char buf[64];
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size() && cols[k] <= i; ++k) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, vals[k],
                                           std::chars_format::general, 17);
            out << (i + 1) << ' ' << (cols[k] + 1) << ' ' << std::string_view(buf, ptr - buf)
                << '\n';
        }
    }
}

inline void write_matrix_market(const SparseSymMatrix& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    write_matrix_market(a, out);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

} // namespace mpcg

#endif // MPCG_MATRIX_MARKET_HPP
