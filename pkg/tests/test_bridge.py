import shutil

import pytest

from r2assist.bridge import (
    OUTPUT_CAP_BYTES,
    OUTPUT_ELISION_MARKER,
    DisasmSession,
    MockBackend,
)
from r2assist.errors import SessionDeadError

from conftest import R2_FIXTURES


class TestOpen:
    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            DisasmSession.open("/no/such/binary")

    def test_mock_opens_without_process(self):
        session = DisasmSession.open_mock({"i": "info"})
        assert session.alive
        assert session.exec("i").output == "info"


class TestExec:
    def test_afl_main(self, mock_session):
        result = mock_session.exec("afl~main")
        assert result.output == "0x000011a9    1 38           main"

    def test_pdf_fixture(self, mock_session):
        assert "push rbp" in mock_session.exec("pdf main").output

    def test_timeout_keeps_session_usable(self):
        session = DisasmSession.open_mock(
            {"slow": "late", "fast": "ok"},
            timeout=0.05, delays={"slow": 10.0})
        result = session.exec("slow")
        assert result.timed_out
        assert session.exec("fast").output == "ok"

    def test_dead_backend(self, mock_session):
        mock_session.close()
        with pytest.raises(SessionDeadError):
            mock_session.exec("afl")

    def test_fifo_attribution(self):
        fixtures = {f"cmd{i}": f"sentinel-{i}" for i in range(20)}
        session = DisasmSession.open_mock(fixtures)
        outputs = [session.exec(f"cmd{i}").output for i in range(20)]
        assert outputs == [f"sentinel-{i}" for i in range(20)]

    def test_binary_output_hex_escaped(self):
        session = DisasmSession.open_mock({"px": "AA\x00\x01BB"})
        out = session.exec("px").output
        assert out == "AA\\x00\\x01BB"

    def test_output_cap_elided(self):
        session = DisasmSession.open_mock({"big": "z" * (OUTPUT_CAP_BYTES + 500)})
        out = session.exec("big").output
        assert out.endswith(OUTPUT_ELISION_MARKER)
        assert len(out) < OUTPUT_CAP_BYTES + len(OUTPUT_ELISION_MARKER) + 1


class TestInitSnapshot:
    def test_default_commands_in_order(self, mock_session):
        snapshot = mock_session.init_snapshot("aaa;iI;afl")
        i_aaa = snapshot.index("Analyze all flags")
        i_ii = snapshot.index("arch     x86")
        i_afl = snapshot.index("entry0")
        assert i_aaa < i_ii < i_afl

    def test_empty(self, mock_session):
        assert mock_session.init_snapshot("") == ""
        assert mock_session.backend.executed == []

    def test_narrowed_listing(self, mock_session):
        snapshot = mock_session.init_snapshot("aaa;afl~main")
        assert "main" in snapshot
        assert "entry0" not in snapshot


# both backends honor the same exec/init_snapshot contract
def conformance_checks(session):
    result = session.exec("afl~main")
    assert "main" in result.output
    assert result.duration >= 0
    snapshot = session.init_snapshot("afl~main")
    assert "main" in snapshot
    assert session.alive


def test_mock_conformance(mock_session):
    conformance_checks(mock_session)


@pytest.mark.skipif(not any(shutil.which(e) for e in ("radare2", "r2")),
                    reason="disassembler not installed")
def test_external_conformance(tmp_path):
    session = DisasmSession.open(shutil.which("ls"), timeout=30)
    try:
        session.exec("aaa")
        conformance_checks(session)
    finally:
        session.close()
