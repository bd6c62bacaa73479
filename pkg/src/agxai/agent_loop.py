"""Iterative recommendation refinement driven by a language model.

The session protocol has one initial round and N refinement rounds.

Round 0 sends the attribution beeswarm image plus the variable catalog and
asks for farmer-facing recommendations. Each refinement round n is a
three-step cycle on top of the full conversation history:

1. ask the model which further statistics or figures it wants, as one
   fenced code block (one clarifying retry if the reply has none);
2. run that code through an executor against the dataset CSV, collecting
   the figures, tables, and stdout it produced into an artifact bundle;
3. send the bundle back together with the original attribution image and
   ask for fully rewritten recommendations.

History is never truncated: the messages for round n extend those of rounds
0..n-1, so later recommendations can only condition on more evidence.

Transport and execution are pluggable. An LLM client exposes
``send(messages) -> str`` over the JSON message shape
``{"role": ..., "parts": [{"kind": "text"|"image", "value": ...}]}``
(images base64). An executor exposes ``run(code, language, dataset_path,
out_dir, time_limit_s) -> ArtifactBundle``; the subprocess implementation
shells out as ``<command> --code <file> --data <csv> --out <dir>`` and
expects a ``manifest.json`` naming the outputs. Scripted replay versions of
both make sessions fully deterministic for tests and demos.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    ClientError,
    EmptyResponse,
    ExecutorCrash,
    ExecutorTimeout,
    NoCodeBlock,
)

DEFAULT_TIME_LIMIT_S = 300
DEFAULT_OUTPUT_QUOTA_BYTES = 256 * 1024 * 1024
DEFAULT_ROUNDS = 10

ENV_LLM_URL = "AGXAI_LLM_URL"
ENV_LLM_KEY = "AGXAI_LLM_KEY"

STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"

RETRY_SUFFIX = (
    "Your previous reply did not include a fenced code block. Reply again "
    "with exactly one fenced code block containing the complete script."
)

SESSION_FORMAT = "agxai.session"
SESSION_VERSION = 1


# --- message helpers ---------------------------------------------------------

def text_part(value: str) -> dict:
    return {"kind": "text", "value": value}


def image_part(data: bytes) -> dict:
    return {"kind": "image", "value": base64.b64encode(data).decode("ascii")}


def user_message(*parts: dict) -> dict:
    return {"role": "user", "parts": list(parts)}


def assistant_message(text: str) -> dict:
    return {"role": "assistant", "parts": [text_part(text)]}


def _image_sha256(part: dict) -> str:
    if "value" in part:
        return hashlib.sha256(base64.b64decode(part["value"])).hexdigest()
    return part["sha256"]  # already a stub from a loaded archive


# --- prompt templates ----------------------------------------------------------

@dataclass(frozen=True)
class PromptTemplates:
    """The three session prompts, loaded from files rather than code.

    The texts shipped under agxai/templates are generic defaults; studies
    should supply their own wording. Required slots: {variable_list} in the
    initial prompt, {round} in the other two.
    """

    initial: str
    code_request: str
    synthesis: str

    def __post_init__(self):
        for name, text, slot in [
            ("initial", self.initial, "{variable_list}"),
            ("code_request", self.code_request, "{round}"),
            ("synthesis", self.synthesis, "{round}"),
        ]:
            if not text.strip():
                raise ValueError(f"{name} prompt template is empty")
            if slot not in text:
                raise ValueError(f"{name} prompt template is missing slot {slot}")

    @classmethod
    def from_files(cls, initial, code_request, synthesis) -> "PromptTemplates":
        return cls(
            Path(initial).read_text(encoding="utf-8"),
            Path(code_request).read_text(encoding="utf-8"),
            Path(synthesis).read_text(encoding="utf-8"),
        )

    @classmethod
    def defaults(cls) -> "PromptTemplates":
        from importlib.resources import files

        root = files("agxai").joinpath("templates")
        return cls(
            root.joinpath("prompt1.txt").read_text(encoding="utf-8"),
            root.joinpath("prompt2.txt").read_text(encoding="utf-8"),
            root.joinpath("prompt3.txt").read_text(encoding="utf-8"),
        )

    def render_initial(self, variable_list: str) -> str:
        return self.initial.replace("{variable_list}", variable_list)

    def render_code_request(self, round_index: int) -> str:
        return self.code_request.replace("{round}", str(round_index))

    def render_synthesis(self, round_index: int) -> str:
        return self.synthesis.replace("{round}", str(round_index))


# --- artifact bundle -----------------------------------------------------------

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def _check_artifact_name(name: str) -> str:
    if not _NAME_RE.match(name) or ".." in name:
        raise ValueError(f"artifact name must be a bare file name, got {name!r}")
    return name


@dataclass(frozen=True)
class ArtifactBundle:
    """Everything one executed analysis produced."""

    figures: tuple[tuple[str, bytes], ...]
    tables: tuple[tuple[str, str], ...]
    stdout: str = ""
    exit_status: int = 0

    def __post_init__(self):
        names = [n for n, _ in self.figures] + [n for n, _ in self.tables]
        for name in names:
            _check_artifact_name(name)
        if len(set(names)) != len(names):
            raise ValueError("artifact names must be unique within a bundle")


# --- LLM clients -----------------------------------------------------------------

class HttpLlmClient:
    """POSTs {"messages": [...]} to the endpoint and returns the "text" field.

    Endpoint and key come from the AGXAI_LLM_URL / AGXAI_LLM_KEY environment
    variables unless given explicitly.
    """

    def __init__(self, url: str | None = None, api_key: str | None = None,
                 timeout_s: float = 120.0):
        self.url = url or os.environ.get(ENV_LLM_URL)
        if not self.url:
            raise ClientError(f"no endpoint: set {ENV_LLM_URL} or pass url")
        self.api_key = api_key or os.environ.get(ENV_LLM_KEY)
        self.timeout_s = timeout_s

    def send(self, messages: list[dict]) -> str:
        import urllib.error
        import urllib.request

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(
            self.url,
            data=json.dumps({"messages": messages}).encode("utf-8"),
            headers=headers,
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
                body = response.read()
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise ClientError(f"endpoint unreachable: {exc}") from exc
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise ClientError(f"endpoint returned invalid JSON: {exc}") from exc
        text = doc.get("text")
        if not isinstance(text, str):
            raise ClientError('endpoint reply is missing the "text" field')
        return text


class ScriptedLlmClient:
    """Replays canned responses in order; used for tests and offline demos."""

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self._cursor = 0
        self.calls: list[int] = []  # message count per send, for assertions

    def send(self, messages: list[dict]) -> str:
        self.calls.append(len(messages))
        if self._cursor >= len(self._responses):
            raise ClientError(
                f"scripted client exhausted after {len(self._responses)} responses"
            )
        reply = self._responses[self._cursor]
        self._cursor += 1
        return reply


# --- executors -------------------------------------------------------------------

_EXTENSIONS = {"": "py", "python": "py", "py": "py", "r": "r", "sh": "sh",
               "bash": "sh", "julia": "jl"}


def _code_extension(language: str) -> str:
    return _EXTENSIONS.get(language.lower(), "txt")


class SubprocessExecutor:
    """Runs generated code through an external worker command.

    Invocation: ``<command> --code <file> --data <csv> --out <dir>``. The
    worker must write ``<dir>/manifest.json`` with "figures" and "tables"
    arrays naming files inside the directory plus a "stdout" string. The
    child gets a wall-clock limit, and the output directory is held to a
    byte quota checked after the run.
    """

    def __init__(self, command,
                 output_quota_bytes: int = DEFAULT_OUTPUT_QUOTA_BYTES):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.output_quota_bytes = output_quota_bytes

    def run(self, code: str, language: str, dataset_path: str, out_dir: str,
            time_limit_s: float = DEFAULT_TIME_LIMIT_S) -> ArtifactBundle:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryDirectory(prefix="agxai-code-") as scratch:
            code_path = Path(scratch) / f"code.{_code_extension(language)}"
            code_path.write_text(code, encoding="utf-8")
            argv = [*self.command, "--code", str(code_path),
                    "--data", str(dataset_path), "--out", str(out)]
            try:
                proc = subprocess.run(
                    argv,
                    capture_output=True,
                    timeout=time_limit_s,
                )
            except subprocess.TimeoutExpired as exc:
                raise ExecutorTimeout(
                    f"executor exceeded {time_limit_s}s wall clock"
                ) from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode("utf-8", "replace")[-1000:]
            raise ExecutorCrash(proc.returncode, tail)
        written = sum(p.stat().st_size for p in out.rglob("*") if p.is_file())
        if written > self.output_quota_bytes:
            raise ExecutorCrash(
                proc.returncode,
                f"output directory holds {written} bytes, "
                f"over the {self.output_quota_bytes}-byte quota",
            )
        manifest_path = out / "manifest.json"
        if not manifest_path.exists():
            raise ExecutorCrash(proc.returncode, "worker wrote no manifest.json")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        figures = tuple(
            (name, (out / _check_artifact_name(name)).read_bytes())
            for name in manifest.get("figures", [])
        )
        tables = tuple(
            (name, (out / _check_artifact_name(name)).read_text(encoding="utf-8"))
            for name in manifest.get("tables", [])
        )
        return ArtifactBundle(figures, tables, manifest.get("stdout", ""),
                              proc.returncode)


class ScriptedExecutor:
    """Replays canned bundles (or raises canned errors) in order."""

    def __init__(self, outcomes):
        self._outcomes = list(outcomes)
        self._cursor = 0

    def run(self, code: str, language: str, dataset_path: str, out_dir: str,
            time_limit_s: float = DEFAULT_TIME_LIMIT_S) -> ArtifactBundle:
        if self._cursor >= len(self._outcomes):
            raise ExecutorCrash(1, "scripted executor exhausted")
        outcome = self._outcomes[self._cursor]
        self._cursor += 1
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def load_replay(path) -> tuple[ScriptedLlmClient, ScriptedExecutor]:
    """Build scripted client and executor from a replay JSON file.

    Shape: {"llm": [response, ...], "executor": [{"figures": [{"name", and
    "text" or "b64"}], "tables": [{"name", "text"}], "stdout", "exit_status",
    or "error": "timeout"|"crash"}, ...]}.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    outcomes = []
    for entry in doc.get("executor", []):
        if "error" in entry:
            if entry["error"] == "timeout":
                outcomes.append(ExecutorTimeout("scripted timeout"))
            else:
                outcomes.append(ExecutorCrash(entry.get("exit_status", 1),
                                              "scripted crash"))
            continue
        figures = tuple(
            (f["name"],
             f["text"].encode("utf-8") if "text" in f else base64.b64decode(f["b64"]))
            for f in entry.get("figures", [])
        )
        tables = tuple((t["name"], t["text"]) for t in entry.get("tables", []))
        outcomes.append(ArtifactBundle(figures, tables,
                                       entry.get("stdout", ""),
                                       entry.get("exit_status", 0)))
    return ScriptedLlmClient(doc.get("llm", [])), ScriptedExecutor(outcomes)


# --- session state -----------------------------------------------------------------

@dataclass
class RoundRecord:
    round_index: int
    status: str
    failure_reason: str | None = None
    prompt_texts: tuple[str, ...] = ()
    response_texts: tuple[str, ...] = ()
    code: str | None = None
    code_language: str | None = None
    bundle: ArtifactBundle | None = None
    recommendation: str = ""

    @property
    def new_figure_count(self) -> int:
        if self.round_index == 0:
            return 1 if self.status == STATUS_COMPLETED else 0
        return len(self.bundle.figures) if self.bundle is not None else 0


@dataclass
class SessionState:
    config: dict
    variable_list: str
    shap_image: bytes | None
    conversation: list[dict] = field(default_factory=list)
    rounds: list[RoundRecord] = field(default_factory=list)

    def record_for(self, round_index: int) -> RoundRecord:
        for record in self.rounds:
            if record.round_index == round_index:
                return record
        raise KeyError(round_index)


def extract_code_block(text: str) -> tuple[str, str] | None:
    """First fenced code block as (code, language tag); None if absent."""
    match = re.search(r"```([A-Za-z0-9_+.-]*)[ \t]*\r?\n(.*?)```", text, re.DOTALL)
    if match is None:
        return None
    code = match.group(2)
    if code.endswith("\n"):
        code = code[:-1]
    return code, match.group(1).lower()


def _send_checked(client, conversation: list[dict]) -> str:
    reply = client.send([*conversation])
    if not isinstance(reply, str) or not reply.strip():
        raise EmptyResponse("model returned an empty reply")
    return reply


def init_round0(shap_image: bytes, variable_list: str,
                templates: PromptTemplates, client, *,
                config: dict | None = None) -> tuple[RoundRecord, SessionState]:
    """Open a session: send the attribution image and variable catalog, get
    the initial recommendations."""
    if not shap_image:
        raise ValueError("round 0 requires a non-empty attribution image")
    if not variable_list.strip():
        raise ValueError("round 0 requires a non-empty variable list")
    session = SessionState(
        config=dict(config or {}),
        variable_list=variable_list,
        shap_image=bytes(shap_image),
    )
    prompt = templates.render_initial(variable_list)
    session.conversation.append(user_message(text_part(prompt),
                                             image_part(session.shap_image)))
    reply = _send_checked(client, session.conversation)
    session.conversation.append(assistant_message(reply))
    record = RoundRecord(
        round_index=0,
        status=STATUS_COMPLETED,
        prompt_texts=(prompt,),
        response_texts=(reply,),
        recommendation=reply,
    )
    session.rounds.append(record)
    return record, session


def _bundle_parts(bundle: ArtifactBundle, shap_image: bytes | None) -> list[dict]:
    parts = []
    for name, content in bundle.tables:
        parts.append(text_part(f"[table {name}]\n{content}"))
    if bundle.stdout.strip():
        parts.append(text_part(f"[stdout]\n{bundle.stdout}"))
    for _, content in bundle.figures:
        parts.append(image_part(content))
    if shap_image:
        parts.append(image_part(shap_image))
    return parts


def refine_round(session: SessionState, round_index: int, client,
                 executor, templates: PromptTemplates) -> RoundRecord:
    """One request-execute-synthesize cycle appended to the session.

    Recoverable protocol failures (no code block after the retry, executor
    timeout or crash, empty model reply) return a failed record instead of
    raising; transport errors still propagate.
    """
    if round_index != len(session.rounds):
        raise ValueError(
            f"rounds must be appended in order; expected {len(session.rounds)}, "
            f"got {round_index}"
        )
    prompts: list[str] = []
    responses: list[str] = []

    def fail(reason: str, **kwargs) -> RoundRecord:
        record = RoundRecord(
            round_index=round_index,
            status=STATUS_FAILED,
            failure_reason=reason,
            prompt_texts=tuple(prompts),
            response_texts=tuple(responses),
            **kwargs,
        )
        session.rounds.append(record)
        return record

    code_prompt = templates.render_code_request(round_index)
    prompts.append(code_prompt)
    session.conversation.append(user_message(text_part(code_prompt)))
    try:
        reply = _send_checked(client, session.conversation)
    except EmptyResponse as exc:
        return fail(str(exc))
    session.conversation.append(assistant_message(reply))
    responses.append(reply)

    extracted = extract_code_block(reply)
    if extracted is None:
        prompts.append(RETRY_SUFFIX)
        session.conversation.append(user_message(text_part(RETRY_SUFFIX)))
        try:
            reply = _send_checked(client, session.conversation)
        except EmptyResponse as exc:
            return fail(str(exc))
        session.conversation.append(assistant_message(reply))
        responses.append(reply)
        extracted = extract_code_block(reply)
        if extracted is None:
            return fail(str(NoCodeBlock("no fenced code block after one retry")))
    code, language = extracted

    time_limit = session.config.get("time_limit_s", DEFAULT_TIME_LIMIT_S)
    dataset_path = session.config.get("dataset_path", "")
    try:
        with tempfile.TemporaryDirectory(prefix="agxai-out-") as out_dir:
            bundle = executor.run(code, language, dataset_path, out_dir, time_limit)
    except (ExecutorTimeout, ExecutorCrash) as exc:
        return fail(str(exc), code=code, code_language=language)

    synthesis_prompt = templates.render_synthesis(round_index)
    prompts.append(synthesis_prompt)
    session.conversation.append(user_message(
        text_part(synthesis_prompt),
        *_bundle_parts(bundle, session.shap_image),
    ))
    try:
        recommendation = _send_checked(client, session.conversation)
    except EmptyResponse as exc:
        return fail(str(exc), code=code, code_language=language, bundle=bundle)
    session.conversation.append(assistant_message(recommendation))
    responses.append(recommendation)

    record = RoundRecord(
        round_index=round_index,
        status=STATUS_COMPLETED,
        prompt_texts=tuple(prompts),
        response_texts=tuple(responses),
        code=code,
        code_language=language,
        bundle=bundle,
        recommendation=recommendation,
    )
    session.rounds.append(record)
    return record


def run_session(dataset_path: str, shap_image: bytes, variable_list: str,
                templates: PromptTemplates, client, executor,
                rounds: int = DEFAULT_ROUNDS, *,
                seed: int = 0,
                time_limit_s: float = DEFAULT_TIME_LIMIT_S,
                continue_on_error: bool = False,
                extra_config: dict | None = None) -> SessionState:
    """Round 0 plus `rounds` refinement cycles.

    A failed refinement round halts the session by default, leaving the
    partial record trail intact; with continue_on_error the loop presses on
    to the next round instead.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    config = {
        "dataset_path": str(dataset_path),
        "rounds": rounds,
        "seed": seed,
        "time_limit_s": time_limit_s,
        "continue_on_error": continue_on_error,
    }
    if extra_config:
        config.update(extra_config)
    _, session = init_round0(shap_image, variable_list, templates, client,
                             config=config)
    for n in range(1, rounds + 1):
        record = refine_round(session, n, client, executor, templates)
        if record.status == STATUS_FAILED:
            if not continue_on_error:
                break
            # carry the last good recommendation so downstream consumers
            # still see one per round
            record.recommendation = session.rounds[n - 1].recommendation
    return session


def progression_report(session: SessionState) -> tuple[tuple[int, int, int], ...]:
    """(round, new figures, cumulative figures) per recorded round.

    Round 0 counts the attribution image itself; refinement rounds count
    their bundle's figures; failed rounds contribute nothing new.
    """
    rows = []
    total = 0
    for record in session.rounds:
        new = record.new_figure_count
        total += new
        rows.append((record.round_index, new, total))
    return tuple(rows)


# --- archive ------------------------------------------------------------------------

def _stub_conversation(conversation: list[dict]) -> list[dict]:
    stubbed = []
    for message in conversation:
        parts = []
        for part in message["parts"]:
            if part["kind"] == "image":
                parts.append({"kind": "image", "sha256": _image_sha256(part)})
            else:
                parts.append({"kind": "text", "value": part["value"]})
        stubbed.append({"role": message["role"], "parts": parts})
    return stubbed


def _round_dir(root: Path, round_index: int) -> Path:
    return root / "rounds" / f"round_{round_index:02d}"


def archive_session(session: SessionState, root, *,
                    timestamp: str | None = None) -> Path:
    """Write the session to disk: session.json manifest, per-round
    prompt/response/recommendation texts, generated code, and every bundle
    artifact byte for byte.

    timestamp lands in the manifest verbatim; leave it None for runs that
    must be byte-identical on replay.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    inputs = root / "inputs"
    inputs.mkdir(exist_ok=True)
    (inputs / "variable_list.txt").write_text(session.variable_list,
                                              encoding="utf-8")
    if session.shap_image is not None:
        (inputs / "shap_image.bin").write_bytes(session.shap_image)

    round_entries = []
    for record in session.rounds:
        rdir = _round_dir(root, record.round_index)
        rdir.mkdir(parents=True, exist_ok=True)
        joiner = "\n\n---\n\n"
        (rdir / "prompt.txt").write_text(joiner.join(record.prompt_texts),
                                         encoding="utf-8")
        (rdir / "response.md").write_text(joiner.join(record.response_texts),
                                          encoding="utf-8")
        (rdir / "recommendation.md").write_text(record.recommendation,
                                                encoding="utf-8")
        entry = {
            "round_index": record.round_index,
            "status": record.status,
            "failure_reason": record.failure_reason,
            "prompt_texts": list(record.prompt_texts),
            "response_texts": list(record.response_texts),
            "recommendation": record.recommendation,
            "code_language": record.code_language,
            "code_file": None,
            "figures": [],
            "tables": [],
            "stdout": None,
            "exit_status": None,
            "new_figure_count": record.new_figure_count,
        }
        if record.code is not None:
            ext = _code_extension(record.code_language or "")
            code_name = f"code.{ext}"
            (rdir / code_name).write_text(record.code, encoding="utf-8")
            entry["code_file"] = code_name
        if record.bundle is not None:
            figures_dir = rdir / "figures"
            figures_dir.mkdir(exist_ok=True)
            for name, content in record.bundle.figures:
                (figures_dir / name).write_bytes(content)
                entry["figures"].append(
                    {"name": name, "sha256": hashlib.sha256(content).hexdigest()}
                )
            tables_dir = rdir / "tables"
            for name, content in record.bundle.tables:
                tables_dir.mkdir(exist_ok=True)
                (tables_dir / name).write_text(content, encoding="utf-8")
                entry["tables"].append({
                    "name": name,
                    "sha256": hashlib.sha256(content.encode("utf-8")).hexdigest(),
                })
            entry["stdout"] = record.bundle.stdout
            entry["exit_status"] = record.bundle.exit_status
        round_entries.append(entry)

    manifest = {
        "format": SESSION_FORMAT,
        "version": SESSION_VERSION,
        "created": timestamp,
        "config": session.config,
        "variable_list_sha256": hashlib.sha256(
            session.variable_list.encode("utf-8")).hexdigest(),
        "shap_image_sha256": (
            hashlib.sha256(session.shap_image).hexdigest()
            if session.shap_image is not None else None
        ),
        "conversation": _stub_conversation(session.conversation),
        "rounds": round_entries,
    }
    (root / "session.json").write_text(json.dumps(manifest, indent=1),
                                       encoding="utf-8")
    return root


def load_session(root) -> SessionState:
    """Rebuild a SessionState from an archive directory.

    Conversation image parts come back as hash stubs (the bytes live in the
    archived figures and inputs, which are verified against the manifest
    hashes while loading)."""
    root = Path(root)
    manifest = json.loads((root / "session.json").read_text(encoding="utf-8"))
    if manifest.get("format") != SESSION_FORMAT:
        raise ValueError(f"not a session archive: {manifest.get('format')!r}")

    variable_list = (root / "inputs" / "variable_list.txt").read_text(
        encoding="utf-8")
    shap_image = None
    if manifest["shap_image_sha256"] is not None:
        shap_image = (root / "inputs" / "shap_image.bin").read_bytes()
        got = hashlib.sha256(shap_image).hexdigest()
        if got != manifest["shap_image_sha256"]:
            raise ValueError("attribution image does not match manifest hash")

    session = SessionState(
        config=manifest["config"],
        variable_list=variable_list,
        shap_image=shap_image,
        conversation=manifest["conversation"],
    )
    for entry in manifest["rounds"]:
        rdir = _round_dir(root, entry["round_index"])
        bundle = None
        if entry["exit_status"] is not None:
            figures = []
            for ref in entry["figures"]:
                content = (rdir / "figures" / ref["name"]).read_bytes()
                if hashlib.sha256(content).hexdigest() != ref["sha256"]:
                    raise ValueError(
                        f"figure {ref['name']!r} does not match manifest hash"
                    )
                figures.append((ref["name"], content))
            tables = []
            for ref in entry["tables"]:
                content = (rdir / "tables" / ref["name"]).read_text(
                    encoding="utf-8")
                if hashlib.sha256(content.encode("utf-8")).hexdigest() != ref["sha256"]:
                    raise ValueError(
                        f"table {ref['name']!r} does not match manifest hash"
                    )
                tables.append((ref["name"], content))
            bundle = ArtifactBundle(tuple(figures), tuple(tables),
                                    entry["stdout"], entry["exit_status"])
        code = None
        if entry["code_file"] is not None:
            code = (rdir / entry["code_file"]).read_text(encoding="utf-8")
        session.rounds.append(RoundRecord(
            round_index=entry["round_index"],
            status=entry["status"],
            failure_reason=entry["failure_reason"],
            prompt_texts=tuple(entry["prompt_texts"]),
            response_texts=tuple(entry["response_texts"]),
            code=code,
            code_language=entry["code_language"],
            bundle=bundle,
            recommendation=entry["recommendation"],
        ))
    return session
