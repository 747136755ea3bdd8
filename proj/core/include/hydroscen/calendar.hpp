#pragma once

#include <compare>
#include <string>
#include <vector>

namespace hydroscen {

struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;

  /// Months since year 0, January.
  int ordinal() const { return year * 12 + (month - 1); }
  static YearMonth from_ordinal(int ordinal);

  YearMonth plus(int months) const { return from_ordinal(ordinal() + months); }
  YearMonth next() const { return plus(1); }
  bool valid() const { return month >= 1 && month <= 12; }
  std::string str() const;
};

/// Inclusive range of calendar years.
struct YearRange {
  int first = 0;
  int last = 0;

  bool contains(const YearMonth& ym) const { return ym.year >= first && ym.year <= last; }
  bool empty() const { return last < first; }
  bool overlaps(const YearRange& other) const {
    return !(last < other.first || other.last < first);
  }
};

/// Consecutive months starting at `start`.
std::vector<YearMonth> month_sequence(YearMonth start, int count);

/// Half-open index interval [begin, end) into an ordered month list.
struct IndexSpan {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
};

/// Indices of `months` falling in `range`; the months must be contiguous so
/// the result is a single span. Empty span when nothing matches.
IndexSpan window_span(const std::vector<YearMonth>& months, const YearRange& range);

}  // namespace hydroscen
