"""Tokenizer for the SQLite SQL dialect."""

from dataclasses import dataclass

# Token kinds
NAME = "NAME"        # bare identifier or keyword
QNAME = "QNAME"      # quoted identifier: "x", `x`, [x]
NUMBER = "NUMBER"
STRING = "STRING"    # single-quoted string literal
BLOB = "BLOB"        # x'...' hex blob
OP = "OP"            # operator symbol
PUNCT = "PUNCT"      # ( ) , . ;
PARAM = "PARAM"      # ? :name @name $name
EOF = "EOF"

_TWO_CHAR_OPS = ("||", "<<", ">>", "<=", ">=", "==", "!=", "<>", "->")
_ONE_CHAR_OPS = "+-*/%<>=&|~"
_PUNCT = "(),.;"


class TokenizeError(Exception):
    """Raised on characters or literals the tokenizer cannot handle."""

    def __init__(self, message: str, pos: int, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.message = message
        self.pos = pos
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str      # raw text; for STRING/QNAME the unquoted value
    pos: int
    line: int
    col: int

    def upper(self) -> str:
        return self.text.upper()


def tokenize(sql: str) -> list[Token]:
    """Split SQL text into tokens, skipping whitespace and comments."""
    tokens: list[Token] = []
    i, n = 0, len(sql)
    line, col = 1, 1

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and sql[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    def err(msg: str) -> TokenizeError:
        return TokenizeError(msg, i, line, col)

    while i < n:
        ch = sql[i]
        if ch in " \t\r\n\f\v":
            advance(1)
            continue
        if ch == "-" and sql[i : i + 2] == "--":
            while i < n and sql[i] != "\n":
                advance(1)
            continue
        if ch == "/" and sql[i : i + 2] == "/*":
            end = sql.find("*/", i + 2)
            if end == -1:
                raise err("unterminated block comment")
            advance(end + 2 - i)
            continue

        start, sline, scol = i, line, col

        if ch == "'":
            # single-quoted string, '' escapes a quote
            j = i + 1
            buf: list[str] = []
            while True:
                if j >= n:
                    raise err("unterminated string literal")
                if sql[j] == "'":
                    if sql[j + 1 : j + 2] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    j += 1
                    break
                buf.append(sql[j])
                j += 1
            tokens.append(Token(STRING, "".join(buf), start, sline, scol))
            advance(j - i)
            continue

        if ch in ('"', "`", "["):
            closing = {'"': '"', "`": "`", "[": "]"}[ch]
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise err("unterminated quoted identifier")
                if sql[j] == closing:
                    if closing != "]" and sql[j + 1 : j + 2] == closing:
                        buf.append(closing)
                        j += 2
                        continue
                    j += 1
                    break
                buf.append(sql[j])
                j += 1
            tokens.append(Token(QNAME, "".join(buf), start, sline, scol))
            advance(j - i)
            continue

        if ch.isdigit() or (ch == "." and sql[i + 1 : i + 2].isdigit()):
            j = i
            if sql[j : j + 2].lower() in ("0x", "0x"):
                j += 2
                while j < n and sql[j] in "0123456789abcdefABCDEF":
                    j += 1
            else:
                while j < n and sql[j].isdigit():
                    j += 1
                if j < n and sql[j] == ".":
                    j += 1
                    while j < n and sql[j].isdigit():
                        j += 1
                if j < n and sql[j] in "eE":
                    k = j + 1
                    if k < n and sql[k] in "+-":
                        k += 1
                    if k < n and sql[k].isdigit():
                        j = k
                        while j < n and sql[j].isdigit():
                            j += 1
            tokens.append(Token(NUMBER, sql[i:j], start, sline, scol))
            advance(j - i)
            continue

        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] in "_$"):
                j += 1
            word = sql[i:j]
            # x'...' blob literal
            if word.lower() == "x" and j < n and sql[j] == "'":
                k = sql.find("'", j + 1)
                if k == -1:
                    raise err("unterminated blob literal")
                tokens.append(Token(BLOB, sql[j + 1 : k], start, sline, scol))
                advance(k + 1 - i)
                continue
            tokens.append(Token(NAME, word, start, sline, scol))
            advance(j - i)
            continue

        if ch == "?":
            j = i + 1
            while j < n and sql[j].isdigit():
                j += 1
            tokens.append(Token(PARAM, sql[i:j], start, sline, scol))
            advance(j - i)
            continue
        if ch in ":@$":
            j = i + 1
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            if j == i + 1:
                raise err(f"unexpected character {ch!r}")
            tokens.append(Token(PARAM, sql[i:j], start, sline, scol))
            advance(j - i)
            continue

        two = sql[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(OP, two, start, sline, scol))
            advance(2)
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token(OP, ch, start, sline, scol))
            advance(1)
            continue
        if ch in _PUNCT:
            tokens.append(Token(PUNCT, ch, start, sline, scol))
            advance(1)
            continue

        raise err(f"unexpected character {ch!r}")

    tokens.append(Token(EOF, "", i, line, col))
    return tokens
