#include "lcirt/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "lcirt/error.hpp"

namespace lcirt {

RawResponses::RawResponses(std::size_t units, std::size_t items)
    : units_(units), items_(items), codes_(units * items, 0), missing_(units * items, 0) {}

RawResponses RawResponses::from_rows(const std::vector<std::vector<int>>& rows, int missing_code) {
    if (rows.empty()) throw ValidationError("response matrix is empty");
    const std::size_t r = rows.front().size();
    if (r == 0) throw ValidationError("response matrix has no items");
    RawResponses raw(rows.size(), r);
    raw.missing_code = missing_code;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != r) {
            throw ValidationError("row " + std::to_string(i + 1) + " has " +
                                  std::to_string(rows[i].size()) + " cells, expected " +
                                  std::to_string(r));
        }
        for (std::size_t j = 0; j < r; ++j) {
            if (rows[i][j] == missing_code)
                raw.set_missing(i, j);
            else
                raw.set(i, j, rows[i][j]);
        }
    }
    return raw;
}

void RawResponses::set(std::size_t i, std::size_t j, int code) {
    codes_[i * items_ + j] = code;
    missing_[i * items_ + j] = 0;
}

void RawResponses::set_missing(std::size_t i, std::size_t j) {
    codes_[i * items_ + j] = 0;
    missing_[i * items_ + j] = 1;
}

bool operator==(const RawResponses& a, const RawResponses& b) {
    return a.units_ == b.units_ && a.items_ == b.items_ && a.codes_ == b.codes_ &&
           a.missing_ == b.missing_;
}

double ResponseMatrix::units() const {
    double n = 0.0;
    for (double f : freq) n += f;
    return n;
}

bool ResponseMatrix::has_missing() const {
    return std::any_of(missing.begin(), missing.end(), [](std::uint8_t m) { return m != 0; });
}

std::vector<int> infer_categories(const RawResponses& raw) {
    std::vector<int> cats(raw.items(), 0);
    for (std::size_t j = 0; j < raw.items(); ++j) {
        int max_code = -1;
        for (std::size_t i = 0; i < raw.units(); ++i) {
            if (raw.missing(i, j)) continue;
            const int v = raw.code(i, j);
            if (v < 0) {
                throw ValidationError("invalid category code " + std::to_string(v) + " at row " +
                                      std::to_string(i + 1) + ", column " +
                                      std::to_string(j + 1));
            }
            max_code = std::max(max_code, v);
        }
        if (max_code < 0)
            throw ValidationError("column " + std::to_string(j + 1) + " is entirely missing");
        cats[j] = max_code + 1;
    }
    return cats;
}

ResponseMatrix aggregate(const RawResponses& raw, const std::optional<std::vector<int>>& cats) {
    if (raw.units() == 0 || raw.items() == 0) throw ValidationError("response matrix is empty");

    ResponseMatrix out;
    out.items = raw.items();
    if (cats) {
        if (cats->size() != raw.items())
            throw ValidationError("category override has " + std::to_string(cats->size()) +
                                  " entries for " + std::to_string(raw.items()) + " items");
        out.cats = *cats;
    } else {
        out.cats = infer_categories(raw);
    }

    const std::size_t r = raw.items();
    for (std::size_t i = 0; i < raw.units(); ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            if (raw.missing(i, j)) continue;
            const int v = raw.code(i, j);
            if (v < 0 || v >= out.cats[j]) {
                throw ValidationError("category code " + std::to_string(v) + " out of range [0, " +
                                      std::to_string(out.cats[j] - 1) + "] at row " +
                                      std::to_string(i + 1) + ", column " +
                                      std::to_string(j + 1));
            }
        }
    }

    std::map<std::vector<int>, std::size_t> index;
    std::vector<int> key(r);
    out.labels.resize(raw.units());
    for (std::size_t i = 0; i < raw.units(); ++i) {
        for (std::size_t j = 0; j < r; ++j) key[j] = raw.missing(i, j) ? -1 : raw.code(i, j);
        auto [it, inserted] = index.try_emplace(key, out.freq.size());
        if (inserted) {
            out.freq.push_back(0.0);
            for (std::size_t j = 0; j < r; ++j) {
                out.codes.push_back(key[j]);
                out.missing.push_back(key[j] < 0 ? 1 : 0);
            }
        }
        out.freq[it->second] += 1.0;
        out.labels[i] = it->second;
    }
    return out;
}

RawResponses expand(const ResponseMatrix& data, int missing_code) {
    RawResponses raw(data.labels.size(), data.items);
    raw.missing_code = missing_code;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const std::size_t p = data.labels[i];
        for (std::size_t j = 0; j < data.items; ++j) {
            if (data.observed(p, j))
                raw.set(i, j, data.code(p, j));
            else
                raw.set_missing(i, j);
        }
    }
    return raw;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::optional<int> parse_int(std::string_view cell) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
    return value;
}

}  // namespace

RawResponses parse_csv(std::istream& in, int missing_code) {
    std::vector<std::vector<int>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (rows.empty() && width == 0) {
            // A first row with any non-integer, non-empty cell is a header.
            const bool header = std::any_of(cells.begin(), cells.end(), [](std::string_view c) {
                return !c.empty() && !parse_int(c);
            });
            width = cells.size();
            if (header) continue;
        }
        if (cells.size() != width) {
            throw ValidationError("CSV line " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(width));
        }
        std::vector<int> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            if (cells[j].empty() || cells[j] == "NA") {
                row[j] = missing_code;
                continue;
            }
            const auto v = parse_int(cells[j]);
            if (!v) {
                throw ValidationError("CSV line " + std::to_string(line_no) + ", column " +
                                      std::to_string(j + 1) + ": '" + std::string(cells[j]) +
                                      "' is not an integer");
            }
            row[j] = *v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("CSV input contains no data rows");
    return RawResponses::from_rows(rows, missing_code);
}

RawResponses read_csv(const std::string& path, int missing_code) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_csv(in, missing_code);
}

std::string to_csv(const RawResponses& raw) {
    std::ostringstream out;
    for (std::size_t j = 0; j < raw.items(); ++j) out << (j ? "," : "") << "X" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < raw.units(); ++i) {
        for (std::size_t j = 0; j < raw.items(); ++j) {
            if (j) out << ',';
            out << (raw.missing(i, j) ? raw.missing_code : raw.code(i, j));
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace lcirt
