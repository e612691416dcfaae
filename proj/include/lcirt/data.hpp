#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lcirt {

inline constexpr int kDefaultMissingCode = 999;

// Unit-by-unit responses. Cells are stored row-major; missingness is kept as a
// separate mask so the sentinel never reaches arithmetic.
class RawResponses {
public:
    RawResponses() = default;
    RawResponses(std::size_t units, std::size_t items);

    // Rows of integer codes; any cell equal to `missing_code` is marked missing.
    static RawResponses from_rows(const std::vector<std::vector<int>>& rows,
                                  int missing_code = kDefaultMissingCode);

    std::size_t units() const { return units_; }
    std::size_t items() const { return items_; }

    int code(std::size_t i, std::size_t j) const { return codes_[i * items_ + j]; }
    bool missing(std::size_t i, std::size_t j) const { return missing_[i * items_ + j] != 0; }

    void set(std::size_t i, std::size_t j, int code);
    void set_missing(std::size_t i, std::size_t j);

    int missing_code = kDefaultMissingCode;

    friend bool operator==(const RawResponses&, const RawResponses&);

private:
    std::size_t units_ = 0;
    std::size_t items_ = 0;
    std::vector<int> codes_;
    std::vector<std::uint8_t> missing_;
};

// Distinct response configurations with their frequencies.
struct ResponseMatrix {
    std::size_t items = 0;
    std::vector<int> codes;               // patterns() x items, row-major; -1 where missing
    std::vector<std::uint8_t> missing;    // same layout as codes
    std::vector<double> freq;             // positive integer counts
    std::vector<std::size_t> labels;      // raw row -> pattern index (0-based)
    std::vector<int> cats;                // l_j per item

    std::size_t patterns() const { return freq.size(); }
    int code(std::size_t p, std::size_t j) const { return codes[p * items + j]; }
    bool observed(std::size_t p, std::size_t j) const { return missing[p * items + j] == 0; }
    double units() const;
    bool has_missing() const;
};

// l_j = 1 + max observed code in column j. Throws ValidationError on a fully
// missing column or a negative code.
std::vector<int> infer_categories(const RawResponses& raw);

// Collapses identical rows (missing positions included in the comparison).
// Patterns keep first-occurrence order. `cats` overrides the inferred category
// counts; every observed code must lie in {0, ..., l_j - 1}.
ResponseMatrix aggregate(const RawResponses& raw,
                         const std::optional<std::vector<int>>& cats = std::nullopt);

// Rebuilds the unit-level matrix from patterns and labels.
RawResponses expand(const ResponseMatrix& data, int missing_code = kDefaultMissingCode);

// CSV: one row per unit, integer cells, optional header row. Empty cells and
// cells equal to `missing_code` are missing.
RawResponses parse_csv(std::istream& in, int missing_code = kDefaultMissingCode);
RawResponses read_csv(const std::string& path, int missing_code = kDefaultMissingCode);
std::string to_csv(const RawResponses& raw);

}  // namespace lcirt
