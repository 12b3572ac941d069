// Text helpers for the command echo panel.

// Character offset of the given whitespace-split token, for placing an
// error caret under the operator's command. A position one past the last
// token (the grammar's "unexpected end of input") points just after the
// text.
export function caretColumn(text: string, tokenIndex: number): number {
  const matcher = /\S+/g;
  let i = 0;
  for (let m = matcher.exec(text); m !== null; m = matcher.exec(text)) {
    if (i === tokenIndex) return m.index;
    i += 1;
  }
  return text.length + 1;
}

export function commandEchoLines(
  text: string,
  error: string | null,
  position: number | null,
): string[] {
  if (error === null) return [text, "ok"];
  if (position === null) return [text, error];
  const col = caretColumn(text, position);
  return [text, `${" ".repeat(col)}^ ${error}`];
}
