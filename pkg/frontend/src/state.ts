/**
 * Client application state as a pure reducer over server frames.
 *
 * The client holds no physics: everything drawn comes verbatim from server
 * frames, so replaying a recorded frame log reproduces the identical state.
 */
import { MetricsFrame, ServerFrame, StateFrame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ClientState {
  status: ConnectionStatus;
  lastFrame: StateFrame | null;
  trail: [number, number][];
  condition: "baseline" | "optimized";
  episodeActive: boolean;
  episodeHistory: MetricsFrame[];
  errorBanner: string | null;
  framesReceived: number;
}

export function initialState(): ClientState {
  return {
    status: "connecting",
    lastFrame: null,
    trail: [],
    condition: "baseline",
    episodeActive: false,
    episodeHistory: [],
    errorBanner: null,
    framesReceived: 0,
  };
}

export const TRAIL_LIMIT = 4000;

export function applyFrame(state: ClientState, frame: ServerFrame | null): ClientState {
  if (frame === null) {
    return { ...state, errorBanner: "received malformed frame" };
  }
  switch (frame.type) {
    case "state": {
      const trail = state.episodeActive
        ? [...state.trail, [frame.ee[0], frame.ee[1]] as [number, number]].slice(-TRAIL_LIMIT)
        : state.trail;
      return {
        ...state,
        lastFrame: frame,
        trail,
        framesReceived: state.framesReceived + 1,
      };
    }
    case "metrics":
      return {
        ...state,
        episodeActive: false,
        episodeHistory: [...state.episodeHistory, frame],
      };
    case "error":
      return { ...state, errorBanner: frame.msg };
  }
}

export function startEpisode(state: ClientState,
                             condition: "baseline" | "optimized"): ClientState {
  if (state.episodeActive) return state;
  return { ...state, episodeActive: true, condition, trail: [] };
}

export function setStatus(state: ClientState, status: ConnectionStatus): ClientState {
  return { ...state, status };
}

export function clearError(state: ClientState): ClientState {
  return { ...state, errorBanner: null };
}
