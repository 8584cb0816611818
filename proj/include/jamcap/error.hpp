#pragma once

#include <stdexcept>
#include <string>

namespace jamcap {

/// Base of every error raised by the library. `category()` feeds the CLI exit code.
class error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

// Invalid numeric argument or out-of-domain value.
class parameter_error : public error
{
public:
  using error::error;
  const char* category() const noexcept override { return "parameter"; }
};

// Operation called outside its contract (e.g. success of a non-transmitting link).
class usage_error : public error
{
public:
  using error::error;
  const char* category() const noexcept override { return "usage"; }
};

class config_error : public error
{
public:
  using error::error;
  const char* category() const noexcept override { return "config"; }
};

class construction_error : public error
{
public:
  using error::error;
  const char* category() const noexcept override { return "construction"; }
};

class bounds_error : public error
{
public:
  using error::error;
  const char* category() const noexcept override { return "bounds"; }
};

class io_error : public error
{
public:
  using error::error;
  const char* category() const noexcept override { return "io"; }
};

} // namespace jamcap
