#pragma once

#include <charconv>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

namespace uavcast {

// Minimal CSV row writer. Doubles use the shortest round-trip representation
// so files are byte-identical for identical inputs.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((emit(fields, first), first = false), ...);
    os_ << '\n';
  }

  static std::string format(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
  }

 private:
  template <typename T>
  void emit(const T& value, bool first) {
    if (!first) os_ << ',';
    if constexpr (std::is_floating_point_v<T>) {
      os_ << format(static_cast<double>(value));
    } else {
      os_ << value;
    }
  }

  std::ostream& os_;
};

}  // namespace uavcast
