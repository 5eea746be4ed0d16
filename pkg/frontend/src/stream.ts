/** Reader for the newline-delimited JSON playback stream. */

export interface StreamFrame {
  t_ms: number;
  angles_deg: number[];
  links_mm: number[][];
}

export type StreamRecord = StreamFrame | { done: true };

export function isTerminal(record: StreamRecord): record is { done: true } {
  return (record as { done?: boolean }).done === true;
}

/**
 * Read one playback stream, invoking onFrame per animation frame. Resolves
 * with the number of frames delivered (the terminal record excluded).
 */
export async function readFrameStream(
  url: string,
  onFrame: (frame: StreamFrame) => void,
  fetchFn: typeof fetch = fetch,
): Promise<number> {
  const response = await fetchFn(url);
  if (!response.ok || response.body === null) {
    throw new Error(`stream failed: HTTP ${response.status}`);
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffered = "";
  let frames = 0;
  let sawTerminal = false;
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffered += decoder.decode(value, { stream: true });
    let newline = buffered.indexOf("\n");
    while (newline >= 0) {
      const line = buffered.slice(0, newline).trim();
      buffered = buffered.slice(newline + 1);
      if (line.length > 0) {
        const record = JSON.parse(line) as StreamRecord;
        if (isTerminal(record)) {
          sawTerminal = true;
        } else {
          frames += 1;
          onFrame(record);
        }
      }
      newline = buffered.indexOf("\n");
    }
  }
  if (!sawTerminal) {
    throw new Error("stream ended without a terminal record");
  }
  return frames;
}
