#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fwda {

// All library failures derive from Error. what() is always "<kind>: <detail>"
// so callers (and the CLI) can grep for the kind without RTTI.
class Error : public std::runtime_error {
public:
    Error(std::string kind, std::string detail)
        : std::runtime_error(kind + ": " + detail),
          kind_(std::move(kind)),
          detail_(std::move(detail)) {}

    const std::string& kind() const { return kind_; }
    const std::string& detail() const { return detail_; }

private:
    std::string kind_;
    std::string detail_;
};

#define FWDA_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& detail) : Error(#Name, detail) {}  \
    }

FWDA_DEFINE_ERROR(ShapeError);
FWDA_DEFINE_ERROR(InvalidParameter);
FWDA_DEFINE_ERROR(DomainError);
FWDA_DEFINE_ERROR(DegenerateCovariance);
FWDA_DEFINE_ERROR(NotPositiveDefinite);
FWDA_DEFINE_ERROR(InsufficientSamples);
FWDA_DEFINE_ERROR(MissingClass);
FWDA_DEFINE_ERROR(InvalidModel);
FWDA_DEFINE_ERROR(ModelFormatError);
FWDA_DEFINE_ERROR(CsvShapeError);
FWDA_DEFINE_ERROR(CsvValueError);
FWDA_DEFINE_ERROR(LabelError);
FWDA_DEFINE_ERROR(InvalidSpec);
FWDA_DEFINE_ERROR(IoError);
FWDA_DEFINE_ERROR(EmptyInput);

#undef FWDA_DEFINE_ERROR

}  // namespace fwda
