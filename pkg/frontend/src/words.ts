/**
 * Description length in words, matching the server's counting rule: a word
 * is a maximal run of non-whitespace, so the count is what splitting on
 * whitespace yields. The live counter in the new-session form and the
 * description_tokens metric therefore always agree.
 */

export function countWords(text: string): number {
  const trimmed = text.trim();
  if (trimmed === '') {
    return 0;
  }
  return trimmed.split(/\s+/).length;
}
