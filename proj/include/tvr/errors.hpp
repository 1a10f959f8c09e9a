#pragma once

#include <stdexcept>
#include <string>

namespace tvr {

/// Base of every error raised by the library.
struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

#define TVR_DECLARE_ERROR(NAME) \
    struct NAME : Error { using Error::Error; }

TVR_DECLARE_ERROR(SchemaError);
TVR_DECLARE_ERROR(KeyError);
TVR_DECLARE_ERROR(TypeError);
TVR_DECLARE_ERROR(NotInvertibleError);
TVR_DECLARE_ERROR(ContractError);
TVR_DECLARE_ERROR(NameError);
TVR_DECLARE_ERROR(RangeError);
TVR_DECLARE_ERROR(StatsError);
TVR_DECLARE_ERROR(StateError);
TVR_DECLARE_ERROR(UnplannableError);
TVR_DECLARE_ERROR(ParseError);

#undef TVR_DECLARE_ERROR

/// Raised when an executed plan disagrees with the batch oracle.  `diff()` describes the mismatch.
struct ValidationError : Error
{
    ValidationError(const std::string &what, std::string diff) : Error(what), diff_(std::move(diff)) { }
    const std::string & diff() const { return diff_; }

    private:
    std::string diff_;
};

}
