#include "rfl/dataset_csv.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rfl {

namespace {

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return fields;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what)
{
    throw std::runtime_error("dataset csv line " + std::to_string(line_no) + ": " + what);
}

double parse_double(std::string_view s, std::size_t line_no)
{
    // std::from_chars for double is missing from some standard libraries we
    // target, so go through strtod on a bounded copy.
    const std::string copy(s);
    char* end = nullptr;
    const double v = std::strtod(copy.c_str(), &end);
    if (copy.empty() || end != copy.c_str() + copy.size())
        fail(line_no, "bad number '" + copy + "'");
    return v;
}

int parse_int(std::string_view s, std::size_t line_no)
{
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail(line_no, "bad integer '" + std::string(s) + "'");
    return v;
}

} // namespace

void write_dataset_csv(std::ostream& out, std::span<const LabeledExample> examples)
{
    const std::size_t dim = examples.empty() ? 0 : examples.front().features.size();
    for (std::size_t d = 0; d < dim; ++d)
        out << "feature_" << d << ',';
    out << "label,noisy\n";

    char buf[32];
    for (const auto& ex : examples) {
        if (ex.features.size() != dim)
            throw std::invalid_argument("examples have inconsistent feature dimensions");
        for (double f : ex.features) {
            std::snprintf(buf, sizeof buf, "%.17g", f);
            out << buf << ',';
        }
        out << ex.label << ',' << (ex.noisy ? 1 : 0) << '\n';
    }
}

std::vector<LabeledExample> read_dataset_csv(std::istream& in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line))
        fail(line_no, "missing header");
    const auto header = split(line);
    if (header.size() < 2 || header[header.size() - 2] != "label" || header.back() != "noisy")
        fail(line_no, "header must end with label,noisy");
    const std::size_t dim = header.size() - 2;
    for (std::size_t d = 0; d < dim; ++d)
        if (header[d] != "feature_" + std::to_string(d))
            fail(line_no, "expected column feature_" + std::to_string(d));

    std::vector<LabeledExample> examples;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto fields = split(line);
        if (fields.size() != dim + 2)
            fail(line_no, "expected " + std::to_string(dim + 2) + " fields");
        LabeledExample ex;
        ex.features.reserve(dim);
        for (std::size_t d = 0; d < dim; ++d)
            ex.features.push_back(parse_double(fields[d], line_no));
        ex.label = parse_int(fields[dim], line_no);
        if (ex.label < 0)
            fail(line_no, "negative label");
        const int noisy = parse_int(fields[dim + 1], line_no);
        if (noisy != 0 && noisy != 1)
            fail(line_no, "noisy must be 0 or 1");
        ex.noisy = noisy == 1;
        examples.push_back(std::move(ex));
    }
    return examples;
}

} // namespace rfl
