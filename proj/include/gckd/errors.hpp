#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gckd {

// Error categories map one-to-one onto the CLI's machine-readable failure line.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}
    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error("shape", w) {}
};
struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error("domain", w) {}
};
struct ParamError : Error {
    explicit ParamError(const std::string& w) : Error("param", w) {}
};
struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error("usage", w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error("io", w) {}
};
struct StructuralError : Error {
    explicit StructuralError(const std::string& w) : Error("structural", w) {}
};

}  // namespace gckd
