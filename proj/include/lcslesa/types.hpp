#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lcslesa {

/// Binary lesion class. The numeric value doubles as a row index into
/// per-class arrays (H matrix rows, posterior vectors).
enum class ClassId : std::uint8_t { benign = 0, malignant = 1 };

inline constexpr std::array<ClassId, 2> kClasses{ClassId::benign, ClassId::malignant};

constexpr std::size_t index_of(ClassId c) { return static_cast<std::size_t>(c); }

constexpr ClassId other(ClassId c) {
  return c == ClassId::benign ? ClassId::malignant : ClassId::benign;
}

std::string_view to_string(ClassId c);
ClassId class_from_string(std::string_view s);

// Error hierarchy. Everything thrown by the library derives from Error so
// the CLI can report a structured diagnostic with a stable category.

class Error : public std::runtime_error {
public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

private:
  std::string category_;
};

struct InputError : Error {
  explicit InputError(const std::string& w) : Error("input", w) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error("dimension", w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};

struct ParseError : Error {
  ParseError(const std::string& w, std::size_t line = 0)
      : Error("parse", line ? "line " + std::to_string(line) + ": " + w : w), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

}  // namespace lcslesa
