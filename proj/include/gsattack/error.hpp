#pragma once

#include <stdexcept>
#include <string>

namespace gsattack {

// Root of every error raised by the library. Each subclass maps to one
// failure category that callers (and the CLI) report by name.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string &what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string &kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define GSATTACK_DEFINE_ERROR(Name)                                            \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string &what) : Error(#Name, what) {}         \
    }

GSATTACK_DEFINE_ERROR(MalformedAsset);
GSATTACK_DEFINE_ERROR(ValueDomain);
GSATTACK_DEFINE_ERROR(ShapeMismatch);
GSATTACK_DEFINE_ERROR(DegenerateCamera);
GSATTACK_DEFINE_ERROR(AdapterFailure);
GSATTACK_DEFINE_ERROR(BadRatio);
GSATTACK_DEFINE_ERROR(NoGroundTruth);
GSATTACK_DEFINE_ERROR(EmptyMask);
GSATTACK_DEFINE_ERROR(NonFiniteLoss);
GSATTACK_DEFINE_ERROR(ConfigError);

#undef GSATTACK_DEFINE_ERROR

} // namespace gsattack
