#ifndef HUANET_TYPES_HPP
#define HUANET_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace huanet
{

using Scalar = double;
using Index = Eigen::Index;

template<typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template<typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matrix = MatrixX<Scalar>;
using Vector = VectorX<Scalar>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Input or data errors (CLI exit code 3).
class DataError : public Error
{
public:
    using Error::Error;
};

class DimensionError : public DataError
{
public:
    using DataError::DataError;
};
class ShapeError : public DataError
{
public:
    using DataError::DataError;
};
class RankError : public DataError
{
public:
    using DataError::DataError;
};
class FormatError : public DataError
{
public:
    using DataError::DataError;
};
class VersionError : public DataError
{
public:
    using DataError::DataError;
};

// Numerical failures (CLI exit code 4).
class NumericalError : public Error
{
public:
    using Error::Error;
};

class DomainError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};
class FactorizationError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};
class SingularKktError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};
class NewtonDivergenceError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};
class InfeasibleOrUnconvergedError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};
class NonFiniteLossError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

// Programming errors in the autodiff plumbing.
class TapeReuseError : public Error
{
public:
    using Error::Error;
};
class MissingTapeError : public Error
{
public:
    using Error::Error;
};

inline void require_dims(bool ok, const std::string& what)
{
    if (!ok) throw DimensionError(what);
}

} // namespace huanet

#endif // HUANET_TYPES_HPP
