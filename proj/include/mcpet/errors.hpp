#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcpet {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

//! Violated precondition (bad argument value, out-of-range index).
class InvalidArgument : public Error
{
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_argument"; }
};

//! Two operands defined on incompatible grids or detector layouts.
class GeometryMismatch : public Error
{
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "geometry_mismatch"; }
};

//! An iterate left dom(loss): some event kernel has zero pairing.
class DomainViolation : public Error
{
  public:
    DomainViolation(const std::string& what, std::size_t event)
        : Error(what), event_(event)
    {
    }
    std::size_t event() const noexcept { return event_; }
    const char* kind() const noexcept override { return "domain_violation"; }

  private:
    std::size_t event_;
};

//! Rejection sampling met an intensity above its declared bound.
class BoundViolation : public Error
{
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "bound_violation"; }
};

//! A checked algorithmic invariant (monotone loss, mass) failed.
class InvariantViolation : public Error
{
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "invariant_violation"; }
};

class IoError : public Error
{
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "io_error"; }
};

}  // namespace mcpet
