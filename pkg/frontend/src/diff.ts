// Word-level diff for presentation: added words emphasized, removed words
// struck through. LCS-based so unchanged context stays plain.

export type DiffOp = { kind: "same" | "add" | "del"; word: string };

const tokenize = (text: string): string[] => text.split(/\s+/).filter(Boolean);

export function diffWords(before: string, after: string): DiffOp[] {
  const a = tokenize(before);
  const b = tokenize(after);
  // LCS table; inputs are sentence-sized so quadratic cost is irrelevant
  const n = a.length;
  const m = b.length;
  const lcs: number[][] = Array.from({ length: n + 1 }, () => new Array(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i][j] = a[i] === b[j] ? lcs[i + 1][j + 1] + 1 : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  const ops: DiffOp[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i] === b[j]) {
      ops.push({ kind: "same", word: a[i] });
      i++;
      j++;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ops.push({ kind: "del", word: a[i] });
      i++;
    } else {
      ops.push({ kind: "add", word: b[j] });
      j++;
    }
  }
  while (i < n) ops.push({ kind: "del", word: a[i++] });
  while (j < m) ops.push({ kind: "add", word: b[j++] });
  return ops;
}

const escapeHtml = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

export function diffHtml(before: string, after: string): string {
  return diffWords(before, after)
    .map(({ kind, word }) => {
      const w = escapeHtml(word);
      if (kind === "add") return `<em class="added">${w}</em>`;
      if (kind === "del") return `<del class="removed">${w}</del>`;
      return w;
    })
    .join(" ");
}

function lineOps(before: string[], after: string[]): DiffOp[] {
  const n = before.length;
  const m = after.length;
  const lcs: number[][] = Array.from({ length: n + 1 }, () => new Array(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i][j] =
        before[i] === after[j] ? lcs[i + 1][j + 1] + 1 : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  const ops: DiffOp[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (before[i] === after[j]) {
      ops.push({ kind: "same", word: before[i] });
      i++;
      j++;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ops.push({ kind: "del", word: before[i] });
      i++;
    } else {
      ops.push({ kind: "add", word: after[j] });
      j++;
    }
  }
  while (i < n) ops.push({ kind: "del", word: before[i++] });
  while (j < m) ops.push({ kind: "add", word: after[j++] });
  return ops;
}

/**
 * Align two sentence lists by LCS, then word-diff whatever changed: a replaced
 * run becomes word-diff rows, insertions all-added rows, removals all-removed.
 */
export function diffLines(before: string[], after: string[]): string[] {
  const ops = lineOps(before, after);
  const rows: string[] = [];
  let k = 0;
  while (k < ops.length) {
    if (ops[k].kind === "same") {
      rows.push(escapeHtml(ops[k].word));
      k++;
      continue;
    }
    const dels: string[] = [];
    const adds: string[] = [];
    while (k < ops.length && ops[k].kind !== "same") {
      (ops[k].kind === "del" ? dels : adds).push(ops[k].word);
      k++;
    }
    for (let r = 0; r < Math.max(dels.length, adds.length); r++) {
      rows.push(diffHtml(dels[r] ?? "", adds[r] ?? ""));
    }
  }
  return rows;
}

export { escapeHtml };
