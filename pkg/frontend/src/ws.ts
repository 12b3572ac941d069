// Socket plumbing behind a structural interface so tests (and the Node
// "ws" client) can stand in for the browser WebSocket.

export interface WebSocketLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => WebSocketLike;

export interface SocketHandlers {
  onOpen(): void;
  onRaw(raw: string): void;
  onClose(): void;
}

export function openSocket(
  url: string,
  factory: SocketFactory,
  handlers: SocketHandlers,
): WebSocketLike {
  const socket = factory(url);
  socket.onopen = () => handlers.onOpen();
  socket.onmessage = (ev) => {
    handlers.onRaw(typeof ev.data === "string" ? ev.data : String(ev.data));
  };
  socket.onclose = () => handlers.onClose();
  socket.onerror = () => {
    // errors are followed by close; the close handler owns recovery
  };
  return socket;
}
