"""Tests for the error hierarchy and exit codes."""

import pytest

from aggfov.common.errors import (
    AggFovError,
    BadMagicError,
    CheckpointError,
    ConfigError,
    DatasetError,
    DimensionError,
    ManifestNotFoundError,
    MissingParameterError,
    NetpbmError,
    NonFiniteError,
    ShapeError,
    exit_code,
)


class TestHierarchy:
    """Tests for exception base classes."""

    @pytest.mark.parametrize(
        "error,builtin",
        [
            (ConfigError("x"), ValueError),
            (ShapeError("x"), ValueError),
            (NonFiniteError("x"), FloatingPointError),
            (NetpbmError("x", 3), ValueError),
        ],
    )
    def test_builtin_bases(self, error: AggFovError, builtin: type) -> None:
        """Test errors are also caught as the closest builtin."""
        assert isinstance(error, builtin)
        assert isinstance(error, AggFovError)

    def test_dimension_error_names_axis(self) -> None:
        """Test DimensionError carries axis, size and divisor."""
        error = DimensionError("height", 100, 16)

        assert isinstance(error, ShapeError)
        assert error.axis == "height"
        assert error.size == 100
        assert "height" in str(error)

    def test_netpbm_error_offset(self) -> None:
        """Test NetpbmError reports the byte offset."""
        error = NetpbmError("bad maxval", 12)

        assert error.offset == 12
        assert "12" in str(error)

    def test_missing_parameter_name(self) -> None:
        """Test MissingParameterError names the parameter."""
        error = MissingParameterError("enc1.down.weight", found=["a"])

        assert isinstance(error, CheckpointError)
        assert error.name == "enc1.down.weight"
        assert "enc1.down.weight" in str(error)


class TestExitCode:
    """Tests for exit_code."""

    @pytest.mark.parametrize(
        "error,code",
        [
            (ConfigError("x"), 2),
            (ManifestNotFoundError("x"), 2),
            (DatasetError("x"), 1),
            (BadMagicError("x"), 1),
            (NonFiniteError("x"), 1),
            (DimensionError("width", 50, 16), 1),
        ],
    )
    def test_codes(self, error: AggFovError, code: int) -> None:
        """Test usage problems exit 2 and runtime problems exit 1."""
        assert exit_code(error) == code
