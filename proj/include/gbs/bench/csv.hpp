#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gbs/error.hpp"

namespace gbs::bench {

/// Shortest text that reads back as the same double; "inf" for infinities.
inline std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string fmt(std::uint64_t v) { return std::to_string(v); }

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ConfigError("csv has no column '" + name + "'");
    }

    void write(std::ostream& out) const {
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (r[i].find_first_of(",\n") != std::string::npos)
                    throw ConfigError("csv field contains a separator: " + r[i]);
                out << (i ? "," : "") << r[i];
            }
            out << '\n';
        };
        line(header);
        for (const auto& r : rows) {
            if (r.size() != header.size()) throw ConfigError("csv row width does not match header");
            line(r);
        }
    }

    std::string str() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }
};

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (line.back() == ',') fields.emplace_back();
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != t.header.size()) throw ConfigError("malformed csv row: " + line);
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw ConfigError("empty csv");
    return t;
}

inline CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

inline double to_double(const std::string& s) {
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("not a number: " + s);
    return v;
}

} // namespace gbs::bench
