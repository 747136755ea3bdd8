#include "hydroscen/calendar.hpp"

#include <cstdio>

#include "hydroscen/errors.hpp"

namespace hydroscen {

YearMonth YearMonth::from_ordinal(int ordinal) {
  int year = ordinal / 12;
  int rem = ordinal % 12;
  if (rem < 0) {
    rem += 12;
    --year;
  }
  return YearMonth{year, rem + 1};
}

std::string YearMonth::str() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
  return buf;
}

std::vector<YearMonth> month_sequence(YearMonth start, int count) {
  std::vector<YearMonth> out;
  out.reserve(count > 0 ? count : 0);
  for (int i = 0; i < count; ++i) out.push_back(start.plus(i));
  return out;
}

IndexSpan window_span(const std::vector<YearMonth>& months, const YearRange& range) {
  IndexSpan span{-1, -1};
  for (int i = 0; i < static_cast<int>(months.size()); ++i) {
    if (!range.contains(months[i])) continue;
    if (span.begin < 0) {
      span.begin = i;
    } else if (span.end != i) {
      throw DataError("window " + std::to_string(range.first) + "-" + std::to_string(range.last) +
                      " is not contiguous in the month list");
    }
    span.end = i + 1;
  }
  if (span.begin < 0) return IndexSpan{0, 0};
  return span;
}

}  // namespace hydroscen
