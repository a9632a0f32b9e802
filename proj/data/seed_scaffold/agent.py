"""Minimal ReAct driver: one model turn, one shell action, one observation.

The engine renders prompts from the template files next to this module and
drives the same loop natively; this file is the perception layer's evolvable
reference implementation and must always compile.
"""

import re
import subprocess

MAX_OBSERVATION_BYTES = 64 * 1024
COMMAND_TIMEOUT_S = 120

BASH_BLOCK = re.compile(r"```bash\n(.*?)```", re.DOTALL)


def parse_bash_action(response):
    """Returns (command, None) or (None, error_kind)."""
    blocks = BASH_BLOCK.findall(response)
    if not blocks:
        return None, "no_block"
    if len(blocks) > 1:
        return None, ("multiple_blocks", len(blocks))
    reasoning = response.split("```bash", 1)[0].strip()
    if not reasoning:
        return None, "no_reasoning"
    return blocks[0].rstrip("\n"), None


def execute(command, cwd):
    try:
        proc = subprocess.run(
            ["bash", "-c", command],
            cwd=cwd,
            capture_output=True,
            timeout=COMMAND_TIMEOUT_S,
        )
        return proc.stdout, proc.stderr, proc.returncode, False
    except subprocess.TimeoutExpired as exc:
        return exc.stdout or b"", exc.stderr or b"", 124, True


def clip(data):
    if len(data) <= MAX_OBSERVATION_BYTES:
        return data, False
    return data[:MAX_OBSERVATION_BYTES], True


def render_observation(template, out, returncode, timed_out, cwd):
    payload, truncated = clip(out)
    text = payload.decode("utf-8", errors="replace")
    if truncated:
        text += "\n[output truncated: first %d of %d bytes shown]" % (
            MAX_OBSERVATION_BYTES,
            len(out),
        )
    observation = template.replace("{{ output }}", text)
    observation = observation.replace("{{ returncode }}", str(returncode))
    observation = observation.replace("{{ cwd }}", cwd)
    return observation


# === SUBMISSION SCORING: DO NOT MODIFY ===
def score_submission(command, flag):
    """Intercepts `submit <token>`; exact byte match decides the episode."""
    stripped = command.strip()
    if not stripped.startswith("submit"):
        return "not_a_submission", None
    token = stripped[len("submit"):].strip()
    if token == flag:
        return "solved", token
    return "incorrect", token
# === END SUBMISSION SCORING ===


def run_episode(model, template, flag, cwd, max_steps=30):
    history = []
    for _ in range(max_steps):
        response = model(history)
        history.append(("assistant", response))
        command, error = parse_bash_action(response)
        if error is not None:
            history.append(("user", "parse error: %r" % (error,)))
            continue
        verdict, _token = score_submission(command, flag)
        if verdict == "solved":
            return "solved"
        if verdict == "incorrect":
            history.append(("user", "Incorrect submission."))
            continue
        out, err, returncode, timed_out = execute(command, cwd)
        observation = render_observation(template, out + err, returncode, timed_out, cwd)
        history.append(("user", observation))
    return "unsolved"
