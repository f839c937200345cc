#pragma once

#include <stdexcept>
#include <string>

namespace vgot {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define VGOT_DEFINE_ERROR(Name, Base)          \
    class Name : public Base {                 \
    public:                                    \
        using Base::Base;                      \
    }

VGOT_DEFINE_ERROR(ConfigError, Error);
VGOT_DEFINE_ERROR(InputError, Error);
VGOT_DEFINE_ERROR(ShapeError, Error);
VGOT_DEFINE_ERROR(RangeError, Error);
VGOT_DEFINE_ERROR(SchedulingError, Error);
VGOT_DEFINE_ERROR(NumericError, Error);
VGOT_DEFINE_ERROR(ParseError, Error);
VGOT_DEFINE_ERROR(SchemaError, ParseError);
VGOT_DEFINE_ERROR(ValidationError, Error);
VGOT_DEFINE_ERROR(StateError, Error);

// Errors in this group map to exit code 2 in the CLI.
VGOT_DEFINE_ERROR(IoError, Error);
VGOT_DEFINE_ERROR(TransportError, IoError);
VGOT_DEFINE_ERROR(FormatError, IoError);
VGOT_DEFINE_ERROR(LengthError, FormatError);

#undef VGOT_DEFINE_ERROR

namespace detail {

// Re-throws the in-flight error with `prefix` prepended, keeping its category.
[[noreturn]] inline void rethrow_with_prefix(const std::string& prefix) {
    try {
        throw;
    } catch (const LengthError& e) {
        throw LengthError(prefix + e.what());
    } catch (const FormatError& e) {
        throw FormatError(prefix + e.what());
    } catch (const TransportError& e) {
        throw TransportError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const SchemaError& e) {
        throw SchemaError(prefix + e.what());
    } catch (const ParseError& e) {
        throw ParseError(prefix + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const InputError& e) {
        throw InputError(prefix + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(prefix + e.what());
    } catch (const RangeError& e) {
        throw RangeError(prefix + e.what());
    } catch (const SchedulingError& e) {
        throw SchedulingError(prefix + e.what());
    } catch (const NumericError& e) {
        throw NumericError(prefix + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    } catch (const StateError& e) {
        throw StateError(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

} // namespace detail
} // namespace vgot
