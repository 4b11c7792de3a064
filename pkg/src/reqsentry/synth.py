"""Deterministic synthetic traffic: benign shop-style requests plus attacks.

Benign requests come from a small family of parameterized templates (paths,
query params, form bodies, session cookies).  Attacks reuse the same
templates and inject one payload drawn from a per-class grammar; every
payload carries a fixed signature substring for its class, listed in
``CLASS_SIGNATURES`` so tests and downstream tooling can verify coverage.

Payloads are inert test strings of the kind WAF corpora use; they exist to
exercise the detector, not to run anywhere.
"""

from __future__ import annotations

import numpy as np

from .classifier import AttackClass

HOST = "shop.example.com"

USER_AGENTS = (
    "Mozilla/5.0 (X11; Linux x86_64; rv:115.0) Gecko/20100101 Firefox/115.0",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 Chrome/120.0",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 13_2) Version/16.3 Safari/605.1.15",
)

WORDS = ("shoes", "shirt", "jacket", "socks", "belt", "scarf", "hat",
         "gloves", "boots", "jeans", "coat", "dress")

NAMES = ("alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi")

STATIC_PATHS = ("/", "/index.html", "/products", "/about", "/css/main.css",
                "/js/app.js", "/images/banner.png", "/cart")

REFERER_PATHS = ("/", "/products", "/search", "/cart")

# (payload template, signature substring); "{n}" takes a small random integer
_PAYLOADS: dict[AttackClass, tuple[tuple[str, str], ...]] = {
    AttackClass.OsCommanding: (
        ("; cat /etc/passwd", "cat /etc/passwd"),
        ("| id", "| id"),
        ("`uname -a`", "`uname"),
        ("&& whoami", "&& whoami"),
        ("; ls -la /tmp", "; ls -la"),
    ),
    AttackClass.PathTraversal: (
        ("../../../../etc/passwd", "../"),
        ("..\\..\\..\\windows\\win.ini", "..\\"),
        ("....//....//etc/shadow", "....//"),
        ("../../var/log/auth.log", "../"),
    ),
    AttackClass.SqlInjection: (
        ("' OR '1'='1", "' OR '"),
        ("{n}' UNION SELECT username, password FROM users--", "UNION SELECT"),
        ("admin'--", "admin'--"),
        ("{n}; DROP TABLE orders--", "DROP TABLE"),
        ("' AND SLEEP({n})--", "SLEEP("),
    ),
    AttackClass.XPathInjection: (
        ("' or count(parent::*[position()={n}])>0 or 'a'='a", "count(parent::"),
        ("'] | //user/*[contains(*,'pass')] | //x['", "//user/*["),
        ("' or name()='username' or 'a'='a", "name()="),
        ("count(//*[name()='password'])", "name()="),
    ),
    AttackClass.LdapInjection: (
        ("*)(uid=*))(|(uid=*", ")(uid=*"),
        ("admin)(&(objectClass=*)", "(objectClass=*"),
        ("*)(|(password=*)", "(password=*"),
        ("*))(|(cn=*", "(|(cn=*"),
    ),
    AttackClass.Ssi: (
        ('<!--#exec cmd="ls -la"-->', "<!--#exec"),
        ('<!--#include virtual="/etc/passwd"-->', "<!--#include"),
        ('<!--#echo var="DOCUMENT_ROOT"-->', "<!--#echo"),
        ('<!--#config timefmt="%A %B"-->', "<!--#config"),
    ),
    AttackClass.Xss: (
        ("<script>alert({n})</script>", "<script>"),
        ("<img src=x onerror=alert(document.cookie)>", "onerror="),
        ("<svg/onload=alert('x')>", "onload="),
        ('"><iframe src="javascript:alert({n})"></iframe>', "javascript:"),
    ),
}

CLASS_SIGNATURES: dict[AttackClass, tuple[str, ...]] = {
    cls: tuple(sig for _, sig in rows) for cls, rows in _PAYLOADS.items()
}


def _session(rng: np.random.Generator) -> str:
    return "".join(rng.choice(list("0123456789abcdef"), size=12))


def _num(rng: np.random.Generator) -> str:
    return str(int(rng.integers(1, 500)))


def _headers(rng: np.random.Generator, cookie: str | None = None) -> str:
    lines = [f"Host: {HOST}",
             f"User-Agent: {USER_AGENTS[int(rng.integers(len(USER_AGENTS)))]}"]
    lines.append(f"Cookie: session={cookie if cookie is not None else _session(rng)}")
    if rng.random() < 0.3:
        lines.append(f"Referer: http://{HOST}{REFERER_PATHS[int(rng.integers(len(REFERER_PATHS)))]}")
    if rng.random() < 0.5:
        lines.append("Accept: text/html")
    return "\r\n".join(lines)


def _get(rng: np.random.Generator, target: str, cookie: str | None = None) -> str:
    return f"GET {target} HTTP/1.1\r\n{_headers(rng, cookie)}\r\n\r\n"


def _post(rng: np.random.Generator, path: str, body: str, method: str = "POST") -> str:
    headers = _headers(rng)
    return (f"{method} {path} HTTP/1.1\r\n{headers}\r\n"
            f"Content-Type: application/x-www-form-urlencoded\r\n\r\n{body}")


def _benign_request(rng: np.random.Generator) -> str:
    word = WORDS[int(rng.integers(len(WORDS)))]
    name = NAMES[int(rng.integers(len(NAMES)))]
    kind = int(rng.integers(8))
    if kind == 0:
        return _get(rng, STATIC_PATHS[int(rng.integers(len(STATIC_PATHS)))])
    if kind == 1:
        return _get(rng, f"/products?category={word}&page={int(rng.integers(1, 20))}")
    if kind == 2:
        return _get(rng, f"/search?q={word}")
    if kind == 3:
        return _get(rng, f"/item?id={_num(rng)}")
    if kind == 4:
        return _get(rng, f"/api/v1/items/{_num(rng)}")
    if kind == 5:
        return _post(rng, "/login", f"u={name}&p={_session(rng)[:8]}")
    if kind == 6:
        return _post(rng, "/comment", f"itemid={_num(rng)}&text={word} {word} again")
    return _post(rng, "/api/v1/profile", f"name={name}&city={word}", method="PUT")


def _attack_request(rng: np.random.Generator, cls: AttackClass) -> str:
    rows = _PAYLOADS[cls]
    template, _ = rows[int(rng.integers(len(rows)))]
    payload = template.replace("{n}", str(int(rng.integers(1, 10))))

    # payloads stay verbatim in the raw request; ones containing spaces
    # cannot ride the request line, so they go to the body or cookie
    if cls is AttackClass.PathTraversal:
        slots = ("path", "query")
    elif " " in payload:
        slots = ("body", "cookie")
    else:
        slots = ("query", "body", "cookie")
    slot = slots[int(rng.integers(len(slots)))]

    if slot == "path":
        return _get(rng, f"/static/{payload}")
    if slot == "query":
        return _get(rng, f"/search?q={payload}")
    if slot == "cookie":
        return _get(rng, "/item?id=" + _num(rng), cookie=payload)
    return _post(rng, "/login", f"u={NAMES[int(rng.integers(len(NAMES)))]}&p={payload}")


def balanced_class_counts(total: int) -> list[int]:
    """Split a total across the 7 classes; remainders go to the lowest codes."""
    base, rem = divmod(total, len(AttackClass))
    return [base + (1 if i < rem else 0) for i in range(len(AttackClass))]


def generate_synthetic_corpus(benign_count: int, attack_count: int,
                              seed: int) -> tuple[list[str], list[tuple[AttackClass, str]]]:
    """Benign raw requests plus labeled attacks, fully determined by the seed."""
    if benign_count < 1 or attack_count < 1:
        raise ValueError("benign_count and attack_count must be at least 1")
    rng = np.random.default_rng(seed)
    benign = [_benign_request(rng) for _ in range(benign_count)]
    attacks: list[tuple[AttackClass, str]] = []
    for cls, n in zip(AttackClass, balanced_class_counts(attack_count)):
        for _ in range(n):
            attacks.append((cls, _attack_request(rng, cls)))
    return benign, attacks
