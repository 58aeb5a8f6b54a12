import type { GatewayClient } from './client.js';
import type { InstanceDoc } from './types.js';
import { isSettled } from './types.js';

export interface WatchHandle {
  stop(): void;
}

const DEFAULT_INTERVAL_MS = 2000;

/**
 * Refresh the instance list every two seconds until nothing is in flight.
 *
 * Ticks never overlap: while one fetch is pending, timer fires are dropped
 * rather than queued. The watch stops itself once every instance sits in a
 * settled state; callers re-arm it after the next mutating action.
 */
export function watchInstances(
  client: GatewayClient,
  onRows: (instances: InstanceDoc[]) => void,
  onError: (err: unknown) => void,
  intervalMs = DEFAULT_INTERVAL_MS,
): WatchHandle {
  let stopped = false;
  let inFlight = false;
  let timer: ReturnType<typeof setInterval> | null = null;

  const clear = () => {
    if (timer !== null) {
      clearInterval(timer);
      timer = null;
    }
  };

  const tick = async () => {
    if (stopped || inFlight) return;
    inFlight = true;
    try {
      const instances = await client.listInstances();
      if (stopped) return;
      onRows(instances);
      if (instances.every((doc) => isSettled(doc.state))) {
        stopped = true;
        clear();
      }
    } catch (err) {
      if (!stopped) onError(err);
    } finally {
      inFlight = false;
    }
  };

  void tick();
  timer = setInterval(() => void tick(), intervalMs);
  return {
    stop() {
      stopped = true;
      clear();
    },
  };
}
